"""Convergence experiments and statistical tests, with CSV/JSON reporting.

Dense mode compares sampled term values against the controller constant
(convergence in probability: the spread must shrink with n). Sparse mode
compares the empirical distribution at the largest size against controller
values over sampled random cores (convergence in distribution, measured by
the two-sample KS statistic), and tracks per-sample distance to the
controller of the same graph's core.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .dense import build_controller, controller_constant
from .evaluator import eval_term
from .games import FeaturePartition, GameParams, lift_partition
from .graphs import ball, core
from .models import (Dense, FeatureDistribution, LinearSparse, RngStream,
                     model_from_config, model_to_config, sample_core,
                     sample_fbp, sample_graph)
from .sparse import SparseConfig, lambda_value, term_core_radius
from .terms import free_vars, parse_term


class LabError(Exception):
    pass


# ---------------------------------------------------------------------------
# empirical distribution helpers

def ecdf(sample):
    """Empirical CDF as a right-continuous step function."""
    xs = np.sort(np.asarray(sample, dtype=np.float64))
    n = len(xs)
    if n == 0:
        raise LabError("empty sample")

    def F(t):
        return np.searchsorted(xs, t, side="right") / n

    F.support = xs
    return F


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b|."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise LabError("empty sample")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def hoeffding_bound(n, a, b, lam) -> float:
    """Two-sided tail bound 2 exp(-2 lam^2 / (n (b-a)^2)) for sums of n
    i.i.d. variables in [a, b] deviating by lam from their mean sum."""
    if n < 1 or b <= a or lam <= 0:
        raise LabError("invalid Hoeffding parameters")
    return 2.0 * math.exp(-2.0 * lam * lam / (n * (b - a) ** 2))


# ---------------------------------------------------------------------------
# experiment configuration

@dataclass
class ExperimentConfig:
    mode: str                      # "dense" | "sparse"
    term: str
    model: dict
    distribution: dict
    sizes: list
    replicates: int
    seed: int
    mc_samples: int = 20000
    sup_points: int = 5000
    mc_fbp_samples: int = 200
    tree_pool_size: int = 200
    epsilon_grid: float = 0.1
    tolerances: dict = field(default_factory=lambda: {
        "mean_abs_err": 0.02, "ks": 0.07, "degenerate_variance": 1e-12})

    def __post_init__(self):
        if self.mode not in ("dense", "sparse"):
            raise LabError(f"unknown mode {self.mode!r}")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])) or not self.sizes:
            raise LabError("sizes must be nonempty and strictly increasing")
        if self.replicates < 2:
            raise LabError("replicates must be >= 2")

    @staticmethod
    def from_json(text) -> "ExperimentConfig":
        obj = json.loads(text) if isinstance(text, str) else text
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        extra = set(obj) - known
        if extra:
            raise LabError(f"unknown config keys {sorted(extra)}")
        return ExperimentConfig(**obj)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class SummaryStats:
    mode: str
    per_size: dict           # n -> {"mean": m, "variance": v, "count": c}
    reference: float | None  # dense controller constant
    ks: float | None         # sparse: largest-n sample vs core reference
    abs_err_quantiles: dict  # sparse: per-sample |term - core controller|
    passes: dict

    def ok(self):
        return all(self.passes.values())

    def to_json(self):
        return json.dumps({
            "mode": self.mode,
            "per_size": {str(k): v for k, v in self.per_size.items()},
            "reference": self.reference,
            "ks": self.ks,
            "abs_err_quantiles": self.abs_err_quantiles,
            "passes": self.passes,
        }, sort_keys=True)


def _csv(rows, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    for key, val in sorted(json.loads(cfg.to_json()).items()):
        buf.write(f"# {key}={json.dumps(val, sort_keys=True)}\n")
    buf.write("mode,n,replicate,value,reference,abs_err\n")
    for mode, n, rep, value, reference, abs_err in rows:
        buf.write(f"{mode},{n},{rep},{value!r},{reference!r},{abs_err!r}\n")
    return buf.getvalue()


def _variance(xs):
    xs = np.asarray(xs, dtype=np.float64)
    return float(np.var(xs, ddof=1)) if len(xs) > 1 else 0.0


# ---------------------------------------------------------------------------
# dense / sparse runs

def run_dense(cfg: ExperimentConfig):
    """Sampled term values per size against the dense controller constant."""
    term = parse_term(cfg.term)
    if free_vars(term):
        raise LabError("dense experiments need a closed term")
    model = model_from_config(cfg.model)
    if not isinstance(model, Dense):
        raise LabError("run_dense needs a dense model")
    D = FeatureDistribution.from_config(cfg.distribution)
    rng = RngStream(cfg.seed)
    ctrl = build_controller(term, model.p, D, cfg.mc_samples, cfg.sup_points)
    reference = controller_constant(ctrl, rng.split(0))
    rows = []
    per_size = {}
    for si, n in enumerate(cfg.sizes):
        vals = []
        for rep in range(cfg.replicates):
            g = sample_graph(model, n, D, rng.split(1, si, rep))
            v = eval_term(term, g)
            vals.append(v)
            rows.append(("dense", n, rep, v, reference, abs(v - reference)))
        per_size[n] = {"mean": float(np.mean(vals)), "variance": _variance(vals),
                       "count": len(vals)}
    tol = cfg.tolerances
    last, first = cfg.sizes[-1], cfg.sizes[0]
    eps_var = tol.get("degenerate_variance", 1e-12)
    passes = {
        "mean_close": abs(per_size[last]["mean"] - reference) <= tol.get("mean_abs_err", 0.02),
        "variance_shrinks": (per_size[last]["variance"] < per_size[first]["variance"]
                             or per_size[last]["variance"] <= eps_var),
    }
    stats = SummaryStats("dense", per_size, reference, None, {}, passes)
    return stats, _csv(rows, cfg)


def run_sparse(cfg: ExperimentConfig):
    """Sampled term values per size; reference distribution from controller
    values over sampled random cores at the term's core radius."""
    term = parse_term(cfg.term)
    if free_vars(term):
        raise LabError("sparse experiments need a closed term")
    model = model_from_config(cfg.model)
    if not isinstance(model, LinearSparse):
        raise LabError("run_sparse needs a linear sparse model")
    D = FeatureDistribution.from_config(cfg.distribution)
    rng = RngStream(cfg.seed)
    scfg = SparseConfig(c=model.c, D=D, mc_fbp_samples=cfg.mc_fbp_samples,
                        tree_pool_size=cfg.tree_pool_size,
                        epsilon_grid=cfg.epsilon_grid)
    rk = term_core_radius(term)
    rows = []
    per_size = {}
    abs_errs = []
    for si, n in enumerate(cfg.sizes):
        vals = []
        for rep in range(cfg.replicates):
            g = sample_graph(model, n, D, rng.split(1, si, rep))
            v = eval_term(term, g)
            lam = lambda_value(term, core(g, rk), scfg, rng.split(2, si, rep))
            vals.append(v)
            err = abs(v - lam)
            rows.append(("sparse", n, rep, v, lam, err))
            if n == cfg.sizes[-1]:
                abs_errs.append(err)
        per_size[n] = {"mean": float(np.mean(vals)), "variance": _variance(vals),
                       "count": len(vals)}
    # reference distribution: controller over fresh random cores
    ref_vals = []
    for rep in range(cfg.replicates):
        h = sample_core(rk, model.c, D, rng.split(3, rep))
        ref_vals.append(lambda_value(term, h, scfg, rng.split(4, rep)))
        rows.append(("sparse_core_ref", cfg.sizes[-1], rep,
                     ref_vals[-1], ref_vals[-1], 0.0))
    largest_vals = [r[3] for r in rows if r[0] == "sparse" and r[1] == cfg.sizes[-1]]
    ks = ks_statistic(largest_vals, ref_vals)
    qs = {q: float(np.quantile(abs_errs, q)) for q in (0.5, 0.9, 0.99)}
    passes = {"ks": ks <= cfg.tolerances.get("ks", 0.07)}
    stats = SummaryStats("sparse", per_size, None, ks, qs, passes)
    return stats, _csv(rows, cfg)


def run_experiment(cfg: ExperimentConfig):
    return run_dense(cfg) if cfg.mode == "dense" else run_sparse(cfg)


# ---------------------------------------------------------------------------
# statistical lemma suites

def chained_binomial_test(alpha, beta, sizes, reps, rng: RngStream,
                          eps_hat=0.02):
    """Simulates Y_n | X_n ~ Bin(X_n, beta) with X_n ~ Bin(n, alpha) and
    reports the deviation probability Pr(|Y_n/n - alpha*beta| >= eps_hat)
    per size (the limit proportion is alpha*beta)."""
    if alpha <= 0 or not (0.0 <= beta <= 1.0):
        raise LabError("invalid chained binomial parameters")
    out = {}
    for si, n in enumerate(sizes):
        gen = rng.split(si).gen
        x = gen.binomial(n, alpha, size=reps)
        y = gen.binomial(x, beta)
        dev = np.abs(y / n - alpha * beta) >= eps_hat
        out[n] = float(np.mean(dev))
    freqs = [out[n] for n in sizes]
    return {"deviation_probability": out,
            "strictly_decreasing": all(a > b for a, b in zip(freqs, freqs[1:]))}


def local_convergence_test(c, D: FeatureDistribution, r, n, samples,
                           params: GameParams, partition: FeaturePartition,
                           rng: RngStream):
    """Compares class frequencies of r-balls in one sparse sample against
    Monte Carlo draws of the truncated featured branching process; classes
    come from partition lifting. Returns the max class-frequency gap."""
    g = sample_graph(LinearSparse(c), n, D, rng.split(0))
    balls = [ball(g, v, r) for v in range(g.n)]
    fbps = [sample_fbp(c, D, r, rng.split(1, i)) for i in range(samples)]
    labels, _ = lift_partition(balls + fbps, partition, params.k, params.eta)
    counts_g, counts_t = {}, {}
    for i, lab in enumerate(labels):
        if i < len(balls):
            counts_g[lab] = counts_g.get(lab, 0) + 1
        else:
            counts_t[lab] = counts_t.get(lab, 0) + 1
    gaps = {}
    for lab in set(counts_g) | set(counts_t):
        gaps[lab] = abs(counts_g.get(lab, 0) / n - counts_t.get(lab, 0) / samples)
    max_gap = max(gaps.values()) if gaps else 0.0
    return {"max_gap": max_gap, "classes": len(gaps),
            "graph_class_freqs": {str(k): v / n for k, v in counts_g.items()},
            "fbp_class_freqs": {str(k): v / samples for k, v in counts_t.items()}}
