"""Real-valued logic Agg(Mean, LMean, Sup) over random featured graphs."""

from ._kernel import KERNEL_NAME
from .dense import (DenseController, GraphType, alpha, alpha_adj,
                    build_controller, controller_constant, controller_value,
                    enumerate_types, extensions, extensions_adj)
from .evaluator import eval_distribution, eval_term
from .games import (CouplingTable, FeaturePartition, GameParams,
                    construct_coupling, lift_partition, max_coupling_mass,
                    similar)
from .graphs import (MRFG, append_root, ball, core, disjoint_union, distance,
                     max_degree, short_cycle_vertices)
from .lab import (ExperimentConfig, SummaryStats, chained_binomial_test, ecdf,
                  hoeffding_bound, ks_statistic, local_convergence_test,
                  run_dense, run_experiment, run_sparse)
from .models import (Dense, FeatureDistribution, LinearSparse, RngStream,
                     sample_core, sample_fbp, sample_graph)
from .sparse import (AxiomReport, SparseConfig, check_core_determinacy,
                     check_fbp_closeness, check_homogeneity, check_richness,
                     lambda_value, verify_preservation)
from .terms import (DEFAULT_REGISTRY, Registry, Term, compile_fo, free_vars,
                    metrics, parse_term)

__version__ = "0.1.0"
