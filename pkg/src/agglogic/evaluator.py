"""Interpretation of terms on MRFGs.

Aggregators enumerate vertex assignments; to keep that feasible the engine
evaluates aggregator-free bodies as vectors over the bound variable and
prunes sup candidates using per-candidate interval bounds (a candidate whose
upper bound cannot exceed an already achieved value is skipped). Mean and
lmean reduce with exactly-rounded summation (math.fsum) over ascending
vertex ids, so results are deterministic across runs and kernels.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernel
from ._program import N_APPLY, N_LMEAN, N_MEAN, N_SUP, GraphData, Program, compile_term
from .graphs import MRFG
from .models import FeatureDistribution, sample_graph
from .terms import DEFAULT_REGISTRY, Term, apply_op, free_vars


class EvalError(Exception):
    pass


class EmptyDomainError(EvalError):
    """mean/sup aggregation over a graph with no vertices."""


class RootArityError(EvalError):
    pass


_PROGRAM_CACHE = {}


def get_program(t: Term, registry=None) -> Program:
    key = (t, id(registry) if registry is not None else 0)
    prog = _PROGRAM_CACHE.get(key)
    if prog is None:
        prog = compile_term(t, registry or DEFAULT_REGISTRY)
        if len(_PROGRAM_CACHE) > 4096:
            _PROGRAM_CACHE.clear()
        _PROGRAM_CACHE[key] = prog
    return prog


def _mean_reduce(values, count):
    return math.fsum(values) / count


def eval_node(prog: Program, node: int, gd: GraphData, env: list) -> float:
    """Recursive evaluation of one program node under a slot environment."""
    if prog.agg_free[node]:
        return _kernel.eval_scalar(prog, node, gd, np.asarray(env, dtype=np.int64))
    op = prog.op[node]
    if op == N_APPLY:
        off, m = prog.b[node], prog.c[node]
        kids = [eval_node(prog, prog.children[off + i], gd, env) for i in range(m)]
        return float(apply_op(prog.a[node], prog.p0[node], prog.p1[node], *kids))

    body = int(prog.a[node])
    if op == N_LMEAN:
        u = env[prog.c[node]]
        cand = gd.indices[gd.indptr[u]:gd.indptr[u + 1]]
        if len(cand) == 0:
            return 0.0
    else:
        if gd.n == 0:
            raise EmptyDomainError("mean/sup over an empty graph")
        cand = np.arange(gd.n, dtype=np.int64)

    envarr = np.asarray(env, dtype=np.int64)
    if prog.agg_free[body]:
        vals = _kernel.eval_vec(prog, body, gd, envarr, cand)
        if op == N_SUP:
            return float(np.max(vals))
        return _mean_reduce(vals, len(cand))

    lo, hi = _kernel.bound_vec(prog, body, gd, envarr, cand)
    exact = lo == hi
    if op == N_SUP:
        best = -math.inf
        if exact.any():
            best = float(np.max(lo[exact]))
        rest = cand[~exact]
        if len(rest):
            rest_hi = hi[~exact]
            order = np.argsort(-rest_hi, kind="stable")
            for i in order:
                if rest_hi[i] <= best:
                    break
                best = max(best, eval_node(prog, body, gd, env + [int(rest[i])]))
        return best
    values = []
    for i, v in enumerate(cand):
        if exact[i]:
            values.append(float(lo[i]))
        else:
            values.append(eval_node(prog, body, gd, env + [int(v)]))
    return _mean_reduce(values, len(cand))


def eval_term(t: Term, g: MRFG, registry=None) -> float:
    """The interpretation of t on g; free variables bind to roots in
    first-occurrence order."""
    prog = get_program(t, registry)
    if prog.n_free != len(g.roots):
        raise RootArityError(
            f"term has {prog.n_free} free variables but graph has {len(g.roots)} roots")
    return eval_node(prog, prog.root, GraphData.of(g), list(g.roots))


def eval_distribution(t: Term, spec, n: int, D: FeatureDistribution,
                      replicates: int, rng) -> list:
    """I.i.d. sample of the value of a closed term under the random model."""
    if free_vars(t):
        raise RootArityError("eval_distribution requires a closed term")
    if replicates < 1:
        raise EvalError("replicates must be >= 1")
    out = []
    for i in range(replicates):
        g = sample_graph(spec, n, D, rng.split(i))
        out.append(eval_term(t, g))
    return out


def static_bound(t: Term, g: MRFG, registry=None):
    """Interval bound of t on g with every variable unknown."""
    prog = get_program(t, registry)
    return _kernel.bound_scalar(prog, prog.root, GraphData.of(g),
                                np.zeros(0, dtype=np.int64))
