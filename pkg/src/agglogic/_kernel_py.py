"""Pure-python (numpy) evaluation kernel; the fallback twin of _kernel_cy.

Both kernels implement the same four entry points with identical float
semantics: every arithmetic op maps to the same IEEE double operation in the
same order, so results agree bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from ._program import (N_APPLY, N_CONST, N_EDGE, N_EQ, N_LMEAN, N_MEAN,
                       N_SUP, N_VAL)
from .terms import (OP_ABS, OP_ADD, OP_CLIP, OP_MAX, OP_MIN, OP_NEG, OP_NOT,
                    OP_PROD2, OP_SCALE, OP_SHIFT, OP_SUB)

KERNEL_NAME = "python"


def _row(gd, u):
    return gd.indices[gd.indptr[u]:gd.indptr[u + 1]]


def _member(sorted_arr, cand):
    """Boolean membership of cand values in a sorted array."""
    if len(sorted_arr) == 0:
        return np.zeros(len(cand), dtype=bool)
    pos = np.searchsorted(sorted_arr, cand)
    pos_c = np.minimum(pos, len(sorted_arr) - 1)
    return sorted_arr[pos_c] == cand


def _apply_vec(opcode, p0, p1, args):
    if opcode == OP_NEG:
        return -args[0]
    if opcode == OP_NOT:
        return 1.0 - args[0]
    if opcode == OP_ADD:
        return args[0] + args[1]
    if opcode == OP_SUB:
        return args[0] - args[1]
    if opcode == OP_MIN:
        return np.minimum(args[0], args[1])
    if opcode == OP_MAX:
        return np.maximum(args[0], args[1])
    if opcode == OP_ABS:
        return np.abs(args[0])
    if opcode == OP_PROD2:
        return args[0] * args[1]
    if opcode == OP_SCALE:
        return p0 * args[0]
    if opcode == OP_SHIFT:
        return args[0] + p0
    if opcode == OP_CLIP:
        return np.minimum(np.maximum(args[0], p0), p1)
    raise AssertionError(opcode)


def _interval_vec(opcode, p0, p1, args):
    if opcode == OP_NEG:
        (lo, hi), = args
        return (-hi, -lo)
    if opcode == OP_NOT:
        (lo, hi), = args
        return (1.0 - hi, 1.0 - lo)
    if opcode == OP_ADD:
        (a, b), (c, d) = args
        return (a + c, b + d)
    if opcode == OP_SUB:
        (a, b), (c, d) = args
        return (a - d, b - c)
    if opcode == OP_MIN:
        (a, b), (c, d) = args
        return (np.minimum(a, c), np.minimum(b, d))
    if opcode == OP_MAX:
        (a, b), (c, d) = args
        return (np.maximum(a, c), np.maximum(b, d))
    if opcode == OP_ABS:
        (lo, hi), = args
        return (np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0)),
                np.maximum(-lo, hi))
    if opcode == OP_PROD2:
        (a, b), (c, d) = args
        p = np.stack([a * c, a * d, b * c, b * d])
        return (p.min(axis=0), p.max(axis=0))
    if opcode == OP_SCALE:
        (lo, hi), = args
        return (p0 * lo, p0 * hi) if p0 >= 0 else (p0 * hi, p0 * lo)
    if opcode == OP_SHIFT:
        (lo, hi), = args
        return (lo + p0, hi + p0)
    if opcode == OP_CLIP:
        (lo, hi), = args
        return (np.minimum(np.maximum(lo, p0), p1),
                np.minimum(np.maximum(hi, p0), p1))
    raise AssertionError(opcode)


def eval_vec(prog, node, gd, env, cand):
    """Exact values of an aggregator-free subtree over candidates for the
    next slot; env covers slots 0..len(env)-1, cand is slot len(env)."""
    k = len(env)
    op = prog.op[node]
    if op == N_CONST:
        return np.full(len(cand), prog.p0[node])
    if op == N_VAL:
        slot = prog.b[node]
        idx = prog.a[node]
        if slot < k:
            return np.full(len(cand), gd.feats[env[slot], idx])
        assert slot == k
        return gd.feats[cand, idx].astype(np.float64, copy=True)
    if op == N_EDGE or op == N_EQ:
        sa, sb = prog.a[node], prog.b[node]
        if sa == sb:
            v = 0.0 if op == N_EDGE else 1.0
            return np.full(len(cand), v)
        if sa > sb:
            sa, sb = sb, sa
        if sb < k:
            u, v = env[sa], env[sb]
            if op == N_EQ:
                return np.full(len(cand), 1.0 if u == v else 0.0)
            return np.full(len(cand), 1.0 if _member(_row(gd, u), np.array([v]))[0] else 0.0)
        assert sb == k and sa < k
        u = env[sa]
        if op == N_EQ:
            return (cand == u).astype(np.float64)
        return _member(_row(gd, u), cand).astype(np.float64)
    if op == N_APPLY:
        off, m = prog.b[node], prog.c[node]
        kids = [eval_vec(prog, prog.children[off + i], gd, env, cand)
                for i in range(m)]
        return _apply_vec(prog.a[node], prog.p0[node], prog.p1[node], kids)
    raise AssertionError("eval_vec on aggregator node")


def bound_vec(prog, node, gd, env, cand):
    """Sound per-candidate interval bounds of any subtree; slots beyond the
    candidate slot are unknown and contribute their atom intervals."""
    k = len(env)
    m = len(cand)
    op = prog.op[node]
    if op == N_CONST:
        v = np.full(m, prog.p0[node])
        return (v, v.copy())
    if op == N_VAL:
        slot, idx = prog.b[node], prog.a[node]
        if slot < k:
            v = np.full(m, gd.feats[env[slot], idx])
            return (v, v.copy())
        if slot == k:
            v = gd.feats[cand, idx].astype(np.float64, copy=True)
            return (v, v.copy())
        return (np.full(m, gd.feat_lo[idx]), np.full(m, gd.feat_hi[idx]))
    if op == N_EDGE or op == N_EQ:
        sa, sb = prog.a[node], prog.b[node]
        if sa == sb:
            v = np.full(m, 0.0 if op == N_EDGE else 1.0)
            return (v, v.copy())
        if sa > sb:
            sa, sb = sb, sa
        if sb > k:
            return (np.zeros(m), np.ones(m))
        vals = eval_vec(prog, node, gd, env, cand)
        return (vals, vals.copy())
    if op == N_APPLY:
        off, nkid = prog.b[node], prog.c[node]
        kids = [bound_vec(prog, prog.children[off + i], gd, env, cand)
                for i in range(nkid)]
        return _interval_vec(prog.a[node], prog.p0[node], prog.p1[node], kids)
    if op == N_MEAN or op == N_SUP:
        return bound_vec(prog, prog.a[node], gd, env, cand)
    if op == N_LMEAN:
        lo, hi = bound_vec(prog, prog.a[node], gd, env, cand)
        # an isolated anchor yields exactly 0
        return (np.minimum(lo, 0.0), np.maximum(hi, 0.0))
    raise AssertionError(op)


def eval_scalar(prog, node, gd, env):
    """Exact scalar value of an aggregator-free subtree, all slots bound."""
    op = prog.op[node]
    if op == N_CONST:
        return float(prog.p0[node])
    if op == N_VAL:
        return float(gd.feats[env[prog.b[node]], prog.a[node]])
    if op == N_EDGE:
        u, v = env[prog.a[node]], env[prog.b[node]]
        if u == v:
            return 0.0
        return 1.0 if _member(_row(gd, u), np.array([v]))[0] else 0.0
    if op == N_EQ:
        return 1.0 if env[prog.a[node]] == env[prog.b[node]] else 0.0
    if op == N_APPLY:
        off, m = prog.b[node], prog.c[node]
        kids = [eval_scalar(prog, prog.children[off + i], gd, env) for i in range(m)]
        return float(_apply_vec(prog.a[node], prog.p0[node], prog.p1[node],
                                [np.float64(x) for x in kids]))
    raise AssertionError("eval_scalar on aggregator node")


def bound_scalar(prog, node, gd, env):
    """Scalar interval with slots < len(env) known, the rest unknown."""
    k = len(env)
    op = prog.op[node]
    if op == N_CONST:
        v = float(prog.p0[node])
        return (v, v)
    if op == N_VAL:
        slot, idx = prog.b[node], prog.a[node]
        if slot < k:
            v = float(gd.feats[env[slot], idx])
            return (v, v)
        return (float(gd.feat_lo[idx]), float(gd.feat_hi[idx]))
    if op == N_EDGE or op == N_EQ:
        sa, sb = prog.a[node], prog.b[node]
        if sa == sb:
            v = 0.0 if op == N_EDGE else 1.0
            return (v, v)
        if max(sa, sb) >= k:
            return (0.0, 1.0)
        v = eval_scalar(prog, node, gd, env)
        return (v, v)
    if op == N_APPLY:
        off, m = prog.b[node], prog.c[node]
        kids = [bound_scalar(prog, prog.children[off + i], gd, env) for i in range(m)]
        from .terms import op_interval
        return op_interval(prog.a[node], prog.p0[node], prog.p1[node], *kids)
    if op == N_MEAN or op == N_SUP:
        return bound_scalar(prog, prog.a[node], gd, env)
    if op == N_LMEAN:
        lo, hi = bound_scalar(prog, prog.a[node], gd, env)
        return (min(lo, 0.0), max(hi, 0.0))
    raise AssertionError(op)
