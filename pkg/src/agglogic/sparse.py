"""Sparse-limit controllers and the axiom checkers around them.

The controller of a term evaluates it as if the graph sat inside an
infinite forest that locally looks like a featured branching process:
global means become expectations over branching-process trees joined
disjointly, suprema additionally range over a pool of candidate trees, and
local means stay exact. Core determinacy caps the tree heights that can
matter at r_k = (3^k - 1)/2 with k the nesting depth of sup/lmean below the
node, so expectations draw truncated trees and pools hold trees of that
height.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernel
from ._program import (N_APPLY, N_LMEAN, N_MEAN, N_SUP, GraphData, compile_term)
from .evaluator import get_program
from .games import (FeaturePartition, GameParams, lift_partition,
                    max_coupling_mass, similar)
from .graphs import (MRFG, append_root, ball, core, disjoint_union, distance,
                     max_degree, rooted_tree_key, short_cycle_vertices,
                     tree_height, _bfs_dist)
from .models import FeatureDistribution, RngStream, sample_fbp
from .terms import (DEFAULT_REGISTRY, Mean, Term, apply_op, core_radius,
                    free_vars, image_bound_all_subterms, metrics, subterms)


class SparseError(Exception):
    pass


@dataclass
class SparseConfig:
    """Numeric configuration of the sparse controllers.

    ``tree_pool`` may list explicit rooted featured trees; otherwise pools
    are built per sup node from ``tree_pool_size`` branching-process samples
    at the applicable height (grid-snapped features) plus a deterministic
    set of small trees carrying support-box corner features.
    """
    c: float
    D: FeatureDistribution
    mc_fbp_samples: int = 200
    tree_pool: tuple = None
    tree_pool_size: int = 200
    epsilon_grid: float = 0.1
    pool_seed: int = 987654321
    registry: object = None

    def __post_init__(self):
        self.registry = self.registry or DEFAULT_REGISTRY
        self._pool_cache = {}
        self._partition = FeaturePartition(self.D, self.epsilon_grid)


def _node_stats(prog):
    """Per program node: srank+lmrank of the subtree (the core-radius index)
    and whether the subtree reads features."""
    n = len(prog.op)
    depth = [0] * n
    has_val = [False] * n
    for i in range(n):
        op = prog.op[i]
        if op == 1:  # VAL
            has_val[i] = True
        elif op == N_APPLY:
            off, m = prog.b[i], prog.c[i]
            kids = [int(prog.children[off + j]) for j in range(m)]
            depth[i] = max((depth[k] for k in kids), default=0)
            has_val[i] = any(has_val[k] for k in kids)
        elif op in (N_MEAN, N_SUP, N_LMEAN):
            kid = int(prog.a[i])
            inc = 1 if op in (N_SUP, N_LMEAN) else 0
            depth[i] = depth[kid] + inc
            has_val[i] = has_val[kid]
    return depth, has_val


def _small_shapes(height):
    """Edge lists of the deterministic mini-pool trees (root 0)."""
    shapes = [(1, [])]
    if height >= 1:
        shapes += [(2, [(0, 1)]), (3, [(0, 1), (0, 2)])]
    if height >= 2:
        shapes += [(3, [(0, 1), (1, 2)])]
    return shapes


def _anchor_features(D: FeatureDistribution):
    pts = set()
    for corner in itertools.product(*[(lo, hi) for lo, hi in D.support_box]):
        pts.add(tuple(float(x) for x in corner))
    if not pts:
        pts.add(())
    return sorted(pts)


def _truncate(tree: MRFG, height: int) -> MRFG:
    if tree_height(tree) <= height:
        return tree
    return ball(tree, tree.roots[0], height)


def _snap_features(tree: MRFG, part: FeaturePartition) -> MRFG:
    if tree.d == 0:
        return tree
    snapped = np.array([part.snap(row) for row in tree.features],
                       dtype=np.float64).reshape(tree.n, tree.d)
    return MRFG(tree.n, tree.edges, tree.roots, snapped,
                feature_box=tree.feature_box)


def _pool_for(cfg: SparseConfig, height: int, feature_free: bool):
    """Deduplicated tree pool for a sup node whose body has the given
    core-radius height; shared across evaluations of the same config."""
    key = (height, feature_free)
    pool = cfg._pool_cache.get(key)
    if pool is not None:
        return pool
    part = cfg._partition
    seen = {}

    def add(tree):
        k = rooted_tree_key(tree, feature_key=(lambda row: ()) if feature_free
                            else (lambda row: tuple(row)))
        if k not in seen:
            seen[k] = tree

    if cfg.tree_pool is not None:
        for t in cfg.tree_pool:
            add(_truncate(t, height))
    else:
        anchors = _anchor_features(cfg.D)
        d = cfg.D.d
        for nverts, edges in _small_shapes(height):
            for combo in itertools.product(anchors, repeat=nverts):
                feats = np.asarray(combo, dtype=np.float64).reshape(nverts, d)
                add(MRFG(nverts, edges, (0,), feats, feature_box=cfg.D.support_box))
        rng = RngStream(cfg.pool_seed)
        for i in range(cfg.tree_pool_size):
            t = sample_fbp(cfg.c, cfg.D, height, rng.split(height, i))
            add(_snap_features(t, part))
    pool = tuple(seen.values())
    cfg._pool_cache[key] = pool
    return pool


class _LambdaRun:
    """One controller evaluation: the compiled term, a config and a base
    stream. Branching-process draws are keyed by (node, sample), so runs on
    different graphs with the same stream share them (common random
    numbers)."""

    def __init__(self, term, cfg, rng):
        self.cfg = cfg
        self.prog = get_program(term, cfg.registry)
        self.depth, self.has_val = _node_stats(self.prog)
        self.rng = rng
        self._draws = {}

    def graph_data(self, g):
        """Kernel view with feature bounds widened to the ambient support
        box: pool trees and branching-process draws live there, so interval
        pruning must cover it."""
        gd = GraphData.of(g)
        box = self.cfg.D.support_box
        if box and g.d == len(box):
            gd.feat_lo = np.minimum(gd.feat_lo, [lo for lo, _ in box])
            gd.feat_hi = np.maximum(gd.feat_hi, [hi for _, hi in box])
        return gd

    def fbp_draw(self, node, s, height):
        key = (node, s)
        t = self._draws.get(key)
        if t is None:
            t = sample_fbp(self.cfg.c, self.cfg.D, height,
                           self.rng.split(int(node), int(s)))
            self._draws[key] = t
        return t

    # -- the recursion ----------------------------------------------------

    def value(self, node, g, gd, env):
        prog = self.prog
        if prog.agg_free[node]:
            return _kernel.eval_scalar(prog, node, gd,
                                       np.asarray(env, dtype=np.int64))
        op = prog.op[node]
        if op == N_APPLY:
            off, m = prog.b[node], prog.c[node]
            kids = [self.value(int(prog.children[off + i]), g, gd, env)
                    for i in range(m)]
            return float(apply_op(prog.a[node], prog.p0[node], prog.p1[node], *kids))

        body = int(prog.a[node])
        if op == N_LMEAN:
            u = env[prog.c[node]]
            nb = g.neighbors(u)
            if not nb:
                return 0.0
            vals = [self.value(body, g, gd, env + [v]) for v in nb]
            return math.fsum(vals) / len(nb)

        if op == N_MEAN:
            h = core_radius(self.depth[body])
            S = self.cfg.mc_fbp_samples
            vals = []
            for s in range(S):
                t = self.fbp_draw(node, s, h)
                g2 = disjoint_union(g, t)
                vals.append(self.value(body, g2, self.graph_data(g2),
                                       env + [g.n + t.roots[0]]))
            return math.fsum(vals) / S

        assert op == N_SUP
        best = -math.inf
        envarr = np.asarray(env, dtype=np.int64)
        if g.n > 0:
            cand = np.arange(g.n, dtype=np.int64)
            if prog.agg_free[body]:
                best = float(np.max(_kernel.eval_vec(prog, body, gd, envarr, cand)))
            else:
                lo, hi = _kernel.bound_vec(prog, body, gd, envarr, cand)
                exact = lo == hi
                if exact.any():
                    best = float(np.max(lo[exact]))
                rest = cand[~exact]
                if len(rest):
                    rest_hi = hi[~exact]
                    order = np.argsort(-rest_hi, kind="stable")
                    for i in order:
                        if rest_hi[i] <= best:
                            break
                        best = max(best, self.value(body, g, gd, env + [int(rest[i])]))
        # sup over disjointly joined trees
        h = core_radius(self.depth[body])
        pool = _pool_for(self.cfg, h, not self.has_val[body])
        static_hi = _kernel.bound_scalar(self.prog, body, gd,
                                         np.asarray(env, dtype=np.int64))[1]
        if pool and static_hi > best:
            for t in pool:
                g2 = disjoint_union(g, t)
                gd2 = self.graph_data(g2)
                env2 = env + [g.n + t.roots[0]]
                lo2, hi2 = _kernel.bound_scalar(self.prog, body, gd2,
                                                np.asarray(env2, dtype=np.int64))
                if hi2 <= best:
                    continue
                if lo2 == hi2:
                    best = max(best, float(lo2))
                    continue
                best = max(best, self.value(body, g2, gd2, env2))
        if best == -math.inf:
            raise SparseError("sup with no graph vertices and an empty tree pool")
        return best


def lambda_value(t: Term, g: MRFG, cfg: SparseConfig, rng: RngStream) -> float:
    """Controller value on an MRFG; deterministic given the stream."""
    prog = get_program(t, cfg.registry)
    if prog.n_free != len(g.roots):
        raise SparseError(
            f"term has {prog.n_free} free variables, graph has {len(g.roots)} roots")
    run = _LambdaRun(t, cfg, rng)
    return run.value(prog.root, g, run.graph_data(g), list(g.roots))


def term_core_radius(t: Term) -> int:
    m = metrics(t)
    return core_radius(m.srank + m.lmrank)


def has_global_mean(t: Term) -> bool:
    return any(isinstance(s, Mean) for s in subterms(t))


def check_core_determinacy(t: Term, g: MRFG, cfg: SparseConfig, rng: RngStream,
                           tol: float = 1e-9):
    """lambda on g versus on its r_k-core with shared draws; exact equality
    is demanded for terms without global mean."""
    r = term_core_radius(t)
    lhs = lambda_value(t, g, cfg, rng)
    rhs = lambda_value(t, core(g, r), cfg, rng)
    budget = 0.0 if not has_global_mean(t) else tol
    return lhs, rhs, abs(lhs - rhs) <= budget


# ---------------------------------------------------------------------------
# axiom checkers

@dataclass
class AxiomReport:
    axiom: str
    params: dict
    verdict: bool
    witness: dict

    def to_json(self):
        def clean(x):
            if isinstance(x, Fraction):
                return str(x)
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, (np.floating,)):
                return float(x)
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple, set, frozenset)):
                return [clean(v) for v in x]
            return x
        return json.dumps({"axiom": self.axiom, "params": clean(self.params),
                           "verdict": self.verdict, "witness": clean(self.witness)},
                          sort_keys=True)


def check_homogeneity(g: MRFG, k: int, eta: float, r: int) -> AxiomReport:
    """(k + #vertices on cycles of length <= 2r+1) * maxdeg^r / n <= eta."""
    if g.n == 0:
        raise SparseError("homogeneity is undefined on the empty graph")
    cyc = len(short_cycle_vertices(g, 2 * r + 1))
    delta = max_degree(g)
    quotient = Fraction(k + cyc) * Fraction(delta) ** r / Fraction(g.n)
    verdict = quotient <= Fraction(eta)
    return AxiomReport("homogeneity", {"k": k, "eta": eta, "r": r},
                       bool(verdict),
                       {"quotient": quotient, "max_degree": delta,
                        "cycle_vertices": cyc, "n": g.n})


def check_richness(g: MRFG, params: GameParams, r: int, witness_trees,
                   max_candidates=None) -> AxiomReport:
    """Searches for k vertices per witness tree whose balls are similar to
    the tree, pairwise far apart and far from roots and short cycles.

    The check runs at every radius r' with height(tree) <= r' <= r. It is a
    decision relative to the supplied witness trees.
    """
    k = params.k
    cyc = short_cycle_vertices(g, 2 * r + 1)
    sources = sorted(set(g.roots) | set(cyc))
    if sources:
        forbidden_dist = _bfs_dist(g, sources)
    else:
        forbidden_dist = [math.inf] * g.n
    eligible = [v for v in range(g.n) if forbidden_dist[v] > 2 * r + 1]
    if max_candidates is not None:
        eligible = eligible[:max_candidates]
    found = {}
    ok = True
    for ti, tree in enumerate(witness_trees):
        h = tree_height(tree)
        if h > r:
            raise SparseError("witness tree taller than r")
        for rp in range(h, r + 1):
            picked = []
            blocked = set()
            for v in eligible:
                if v in blocked:
                    continue
                if similar(ball(g, v, rp), tree, params):
                    picked.append(v)
                    if len(picked) == k:
                        break
                    near = _bfs_dist(g, [v], cap=2 * r + 1)
                    blocked |= {u for u in range(g.n) if near[u] <= 2 * r + 1}
            found[(ti, rp)] = picked
            if len(picked) < k:
                ok = False
    return AxiomReport("richness",
                       {"k": k, "epsilon": params.epsilon, "eta": params.eta, "r": r},
                       ok,
                       {"vertices": {f"tree{ti}_r{rp}": vs
                                     for (ti, rp), vs in found.items()}})


def check_fbp_closeness(g: MRFG, params: GameParams, r: int,
                        P: FeaturePartition, mc: int, rng: RngStream,
                        c: float, max_classes: int = 60) -> AxiomReport:
    """Couples the vertex-ball distribution against truncated branching
    processes through lifted classes, then decides whether a coupling can
    put mass >= 1 - eta on similar pairs (exact max-flow over a relation of
    class representatives).
    """
    eta = Fraction(params.eta)
    per_radius = {}
    verdict = True
    for rp in range(r + 1):
        balls = [ball(g, v, rp) for v in range(g.n)]
        D = P.distribution
        samples = [sample_fbp(c, D, rp, rng.split(rp, i)) for i in range(mc)]
        collection = balls + samples
        labels, _ = lift_partition(collection, P, params.k, params.eta)
        nL, nR = len(balls), len(samples)
        left_counts, right_counts, reps = {}, {}, {}
        for i, lab in enumerate(labels):
            reps.setdefault(lab, collection[i])
            if i < nL:
                left_counts[lab] = left_counts.get(lab, 0) + 1
            else:
                right_counts[lab] = right_counts.get(lab, 0) + 1
        classes = sorted(set(left_counts) | set(right_counts),
                         key=lambda cl: -(left_counts.get(cl, 0) + right_counts.get(cl, 0)))
        kept = classes[:max_classes]
        keptset = set(kept)
        tailL = sum(v for cl, v in left_counts.items() if cl not in keptset)
        tailR = sum(v for cl, v in right_counts.items() if cl not in keptset)
        left = [(cl, Fraction(left_counts.get(cl, 0), nL)) for cl in kept]
        right = [(cl, Fraction(right_counts.get(cl, 0), nR)) for cl in kept]
        left.append(("_tail", Fraction(tailL, nL)))
        right.append(("_tail", Fraction(tailR, nR)))
        simcache = {}

        def related(a, b):
            if a == "_tail" or b == "_tail":
                return False
            key = (a, b)
            if key not in simcache:
                simcache[key] = similar(reps[a], reps[b], params)
            return simcache[key]

        mass = max_coupling_mass(left, right, related)
        per_radius[rp] = {"classes": len(classes), "kept": len(kept),
                          "matched_mass": mass,
                          "tail_mass": (Fraction(tailL, nL), Fraction(tailR, nR))}
        if mass < 1 - eta:
            verdict = False
    return AxiomReport("fbp_closeness",
                       {"k": params.k, "epsilon": params.epsilon,
                        "eta": params.eta, "r": r, "mc": mc, "c": c},
                       verdict, per_radius)


@dataclass
class PreservationReport:
    similar_holds: bool
    diff: float
    bound: float
    passed: bool


def verify_preservation(t: Term, g: MRFG, h: MRFG, epsilon: float,
                        cfg: SparseConfig, rng: RngStream,
                        mc_tol: float = 1e-9) -> PreservationReport:
    """Checks |lambda(g) - lambda(h)| <= epsilon * slope on a pair that the
    game relates at (Srank+LMrank, epsilon, epsilon/4C); the game
    precondition is verified, not assumed."""
    m = metrics(t, cfg.registry,
                feature_box=g.feature_box if g.d else None)
    C = image_bound_all_subterms(t, cfg.registry,
                                 feature_box=g.feature_box if g.d else None)
    eta = min(1.0, epsilon / (4 * C)) if C > 0 else 1.0
    k = m.srank + m.lmrank
    params = GameParams(k, epsilon, eta)
    sim = similar(g, h, params)
    if not sim:
        return PreservationReport(False, math.nan, epsilon * m.slope, False)
    diff = abs(lambda_value(t, g, cfg, rng) - lambda_value(t, h, cfg, rng))
    bound = epsilon * m.slope
    return PreservationReport(True, diff, bound, diff <= bound + mc_tol)
