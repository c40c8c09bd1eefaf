"""Flat-program form of terms, shared by the evaluation kernels.

A term compiles to parallel arrays of nodes in postorder (children before
parents, root last). Variables become slot indices into the root/binding
stack: free variables take slots 0..k-1 in first-occurrence order, each
aggregator binds the next slot. Kernels evaluate nodes against a graph in
CSR form plus a slot environment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import terms as T

N_CONST = 0
N_VAL = 1
N_EDGE = 2
N_EQ = 3
N_APPLY = 4
N_MEAN = 5
N_LMEAN = 6
N_SUP = 7


@dataclass(eq=False)
class Program:
    op: np.ndarray        # int32, node kind
    a: np.ndarray         # int32: VAL feature idx / EDGE,EQ slot / APPLY opcode / agg child
    b: np.ndarray         # int32: VAL slot / EDGE,EQ slot / APPLY child offset / agg slot
    c: np.ndarray         # int32: APPLY arity / LMEAN anchor slot
    p0: np.ndarray        # float64: CONST value / APPLY param 0
    p1: np.ndarray        # float64: APPLY param 1
    children: np.ndarray  # int32, flattened APPLY child node ids
    agg_free: np.ndarray  # uint8, subtree contains no aggregator
    root: int
    n_free: int
    free_names: tuple

    def __len__(self):
        return len(self.op)


def compile_term(t: T.Term, registry: T.Registry = None) -> Program:
    registry = registry or T.DEFAULT_REGISTRY
    fv = T.free_vars(t)
    slot_of = {v: i for i, v in enumerate(fv)}

    op, a, b, c, p0, p1 = [], [], [], [], [], []
    children = []
    agg_free = []

    def emit(**kw):
        op.append(kw.get("op"))
        a.append(kw.get("a", 0))
        b.append(kw.get("b", 0))
        c.append(kw.get("c", 0))
        p0.append(kw.get("p0", 0.0))
        p1.append(kw.get("p1", 0.0))
        agg_free.append(kw.get("agg_free", 1))
        return len(op) - 1

    def walk(t, scope, depth):
        if isinstance(t, T.Const):
            return emit(op=N_CONST, p0=float(t.value))
        if isinstance(t, T.Val):
            return emit(op=N_VAL, a=t.index - 1, b=scope[t.var])
        if isinstance(t, T.Edge):
            return emit(op=N_EDGE, a=scope[t.a], b=scope[t.b])
        if isinstance(t, T.Eq):
            return emit(op=N_EQ, a=scope[t.a], b=scope[t.b])
        if isinstance(t, T.Apply):
            entry = registry[t.fn]
            if len(t.args) != entry.arity:
                raise T.ArityMismatchError(
                    f"{t.fn} expects {entry.arity} args, got {len(t.args)}")
            kids = [walk(s, scope, depth) for s in t.args]
            off = len(children)
            children.extend(kids)
            free = all(agg_free[k] for k in kids)
            return emit(op=N_APPLY, a=entry.opcode, b=off, c=len(kids),
                        p0=entry.p0, p1=entry.p1, agg_free=1 if free else 0)
        slot = len(slot_of) + depth
        if isinstance(t, T.Mean):
            kid = walk(t.body, {**scope, t.var: slot}, depth + 1)
            return emit(op=N_MEAN, a=kid, b=slot, agg_free=0)
        if isinstance(t, T.Sup):
            kid = walk(t.body, {**scope, t.var: slot}, depth + 1)
            return emit(op=N_SUP, a=kid, b=slot, agg_free=0)
        if isinstance(t, T.LMean):
            if t.anchor not in scope:
                raise T.UnboundAnchorError(f"anchor {t.anchor!r} not in scope")
            kid = walk(t.body, {**scope, t.var: slot}, depth + 1)
            return emit(op=N_LMEAN, a=kid, b=slot, c=scope[t.anchor], agg_free=0)
        raise AssertionError(t)

    root = walk(t, dict(slot_of), 0)
    return Program(
        np.array(op, dtype=np.int32), np.array(a, dtype=np.int32),
        np.array(b, dtype=np.int32), np.array(c, dtype=np.int32),
        np.array(p0, dtype=np.float64), np.array(p1, dtype=np.float64),
        np.array(children, dtype=np.int32) if children else np.zeros(0, np.int32),
        np.array(agg_free, dtype=np.uint8), root, len(fv), fv)


@dataclass(eq=False)
class GraphData:
    """Kernel view of an MRFG: CSR adjacency, features and feature box."""
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    feats: np.ndarray
    feat_lo: np.ndarray
    feat_hi: np.ndarray

    @staticmethod
    def of(g) -> "GraphData":
        indptr, indices = g.csr()
        lo = np.array([iv[0] for iv in g.feature_box], dtype=np.float64)
        hi = np.array([iv[1] for iv in g.feature_box], dtype=np.float64)
        return GraphData(g.n, indptr, indices, g.features, lo, hi)
