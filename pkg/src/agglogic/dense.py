"""Dense-limit controllers: per-graph-type evaluators of term limits.

A graph quantifier-free type fixes the equality pattern and the adjacency
pattern of a variable tuple. Aggregators translate into weighted sums /
suprema over one-variable extension types: mean weights an extension by the
expected proportion of nodes realizing it, sup maximizes over extensions
and over the feature space. Expectations are Monte Carlo, suprema are
sample maxima over the support plus its corners and atoms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import terms as T
from .models import (DiscreteMixture, FeatureDistribution, ProductOfCoordinates,
                     UniformBox)


class DenseError(Exception):
    pass


@dataclass(frozen=True)
class GraphType:
    """Quantifier-free type: equality classes (first-occurrence numbering,
    one entry per variable) and adjacency between classes."""
    eq_classes: tuple
    adjacency: frozenset  # of (i, j) class pairs, i < j

    @property
    def k(self):
        return len(self.eq_classes)

    @property
    def num_classes(self):
        return max(self.eq_classes) + 1 if self.eq_classes else 0

    def has_edge(self, i, j):
        a, b = self.eq_classes[i], self.eq_classes[j]
        if a == b:
            return False
        return (min(a, b), max(a, b)) in self.adjacency

    def equal(self, i, j):
        return self.eq_classes[i] == self.eq_classes[j]


EMPTY_TYPE = GraphType((), frozenset())


def _partitions(k):
    """Canonical set partitions of [k] as class-index tuples."""
    def rec(prefix, mx):
        if len(prefix) == k:
            yield tuple(prefix)
            return
        for c in range(mx + 2):
            yield from rec(prefix + [c], max(mx, c))
    if k == 0:
        yield ()
        return
    yield from rec([0], 0)


def enumerate_types(k: int):
    """All consistent types on k variables (guarded to small k)."""
    if k > 5:
        raise DenseError("enumerate_types is guarded to k <= 5")
    out = []
    for part in _partitions(k):
        e = max(part) + 1 if part else 0
        pairs = list(itertools.combinations(range(e), 2))
        for bits in itertools.product((False, True), repeat=len(pairs)):
            adj = frozenset(p for p, b in zip(pairs, bits) if b)
            out.append(GraphType(part, adj))
    return out


def extensions(t: GraphType):
    """One-variable extensions: the new variable either coincides with an
    existing class or forms a new class with any adjacency pattern."""
    out = []
    e = t.num_classes
    for c in range(e):
        out.append(GraphType(t.eq_classes + (c,), t.adjacency))
    for subset in itertools.chain.from_iterable(
            itertools.combinations(range(e), r) for r in range(e + 1)):
        adj = t.adjacency | {(c, e) for c in subset}
        out.append(GraphType(t.eq_classes + (e,), frozenset(adj)))
    return out


def extensions_adj(t: GraphType, i: int):
    """Extensions owning an edge between the new variable and variable i."""
    return [x for x in extensions(t) if x.has_edge(i, t.k)]


def is_coincidence(t: GraphType, ext: GraphType) -> bool:
    return ext.eq_classes[-1] < t.num_classes


def alpha(t: GraphType, ext: GraphType, p: float) -> float:
    """Limit proportion of nodes realizing the extension: p^r (1-p)^(e-r)
    over the e equality classes of t, r of them adjacent to the new node.
    Coincidence extensions have vanishing proportion, weight 0.
    """
    if not (0.0 < p < 1.0):
        raise DenseError("alpha requires p in (0,1)")
    _check_extension(t, ext)
    if is_coincidence(t, ext):
        return 0.0
    e = t.num_classes
    new = ext.eq_classes[-1]
    r = sum(1 for c in range(e) if (min(c, new), max(c, new)) in ext.adjacency)
    return p ** r * (1.0 - p) ** (e - r)


def alpha_adj(t: GraphType, ext: GraphType, i: int, p: float) -> float:
    """Limit proportion within the neighborhood of variable i: the edge to
    i's class is conditioned on, the remaining e-1 classes are free."""
    if not (0.0 < p < 1.0):
        raise DenseError("alpha requires p in (0,1)")
    _check_extension(t, ext)
    if not ext.has_edge(i, t.k):
        raise DenseError("extension lacks the required edge")
    if is_coincidence(t, ext):
        return 0.0
    e = t.num_classes
    new = ext.eq_classes[-1]
    ci = t.eq_classes[i]
    r = sum(1 for c in range(e)
            if c != ci and (min(c, new), max(c, new)) in ext.adjacency)
    return p ** r * (1.0 - p) ** (e - 1 - r)


def _check_extension(t, ext):
    if ext.k != t.k + 1 or ext.eq_classes[:t.k] != t.eq_classes:
        raise DenseError(f"{ext} does not extend {t}")
    restricted = frozenset((a, b) for (a, b) in ext.adjacency
                           if a < t.num_classes and b < t.num_classes)
    if restricted != t.adjacency:
        raise DenseError(f"{ext} does not extend {t}")


# ---------------------------------------------------------------------------
# controllers

@dataclass
class DenseController:
    term: T.Term
    p: float
    D: FeatureDistribution
    mc_samples: int = 20000
    sup_points: int = 5000
    registry: T.Registry = None

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise DenseError("dense controllers require p in (0,1)")
        self.registry = self.registry or T.DEFAULT_REGISTRY
        self._fv = T.free_vars(self.term)

    @property
    def k(self):
        return len(self._fv)


def build_controller(t: T.Term, p: float, D: FeatureDistribution,
                     mc_samples=20000, sup_points=5000, registry=None) -> DenseController:
    return DenseController(t, p, D, mc_samples, sup_points, registry)


def _anchor_points(D: FeatureDistribution):
    """Corners of the support box plus any discrete atoms; always probed in
    sup approximations so box extremes are never missed."""
    pts = set()
    box = D.support_box
    if box:
        for corner in itertools.product(*[(lo, hi) for lo, hi in box]):
            pts.add(tuple(float(x) for x in corner))
    k = D.kind
    if isinstance(k, DiscreteMixture):
        for pt, _ in k.atoms:
            pts.add(tuple(float(x) for x in pt))
    if isinstance(k, ProductOfCoordinates):
        pass  # box corners already cover the per-coordinate extremes
    return sorted(pts)


def _controller_eval(ctrl: DenseController, node: T.Term, gtype: GraphType,
                     var_slots, X, rng, path):
    """Batched controller value: X has shape (B, k, d) giving features for
    the type's variables; returns shape (B,)."""
    B = X.shape[0]
    if isinstance(node, T.Const):
        return np.full(B, float(node.value))
    if isinstance(node, T.Val):
        j = var_slots[node.var]
        return X[:, j, node.index - 1].astype(np.float64, copy=True)
    if isinstance(node, T.Edge):
        v = 1.0 if gtype.has_edge(var_slots[node.a], var_slots[node.b]) else 0.0
        return np.full(B, v)
    if isinstance(node, T.Eq):
        v = 1.0 if gtype.equal(var_slots[node.a], var_slots[node.b]) else 0.0
        return np.full(B, v)
    if isinstance(node, T.Apply):
        entry = ctrl.registry[node.fn]
        kids = [_controller_eval(ctrl, a, gtype, var_slots, X, rng, path + (i,))
                for i, a in enumerate(node.args)]
        from ._kernel_py import _apply_vec
        return _apply_vec(entry.opcode, entry.p0, entry.p1, kids)

    d = ctrl.D.d
    feature_free = not T.contains_val(node.body)

    def body_on(ext, Y, sub_path):
        """Evaluate the body on the extended type with new-variable features
        Y of shape (B, S, d); returns (B, S)."""
        S = Y.shape[1]
        Xe = np.repeat(X[:, None, :, :], S, axis=1).reshape(B * S, gtype.k, d)
        Xnew = np.concatenate([Xe, Y.reshape(B * S, 1, d)], axis=1)
        slots = {**var_slots, node.var: gtype.k}
        vals = _controller_eval(ctrl, node.body, ext, slots, Xnew, rng, sub_path)
        return vals.reshape(B, S)

    if isinstance(node, (T.Mean, T.LMean)):
        if isinstance(node, T.Mean):
            exts = [(x, alpha(gtype, x, ctrl.p)) for x in extensions(gtype)]
        else:
            i = var_slots[node.anchor]
            exts = [(x, alpha_adj(gtype, x, i, ctrl.p))
                    for x in extensions_adj(gtype, i)]
        exts = [(x, w) for x, w in exts if w > 0.0]
        S = 1 if feature_free else ctrl.mc_samples
        draw_rng = rng.split(*path)
        total = np.zeros(B)
        chunk = max(1, min(S, int(4e6 // max(B, 1))))
        done = 0
        ci = 0
        while done < S:
            s = min(chunk, S - done)
            Y = (np.zeros((1, s, d)) if feature_free
                 else ctrl.D.sample(draw_rng.split(ci), B * s).reshape(B, s, d))
            if feature_free and B > 1:
                Y = np.zeros((B, s, d))
            acc = np.zeros((B, s))
            for ei, (ext, w) in enumerate(exts):
                acc += w * body_on(ext, Y, path + (1, ei))
            total += acc.sum(axis=1)
            done += s
            ci += 1
        return total / S

    assert isinstance(node, T.Sup)
    anchors = _anchor_points(ctrl.D)
    best = np.full(B, -math.inf)
    for ei, ext in enumerate(extensions(gtype)):
        sub_path = path + (1, ei)
        if is_coincidence(gtype, ext):
            # the new variable is an existing one; its features are forced
            src = gtype.eq_classes.index(ext.eq_classes[-1])
            # any variable in that class works; use the first
            srcs = [j for j, c in enumerate(gtype.eq_classes)
                    if c == ext.eq_classes[-1]]
            Y = X[:, srcs[0]:srcs[0] + 1, :]
            vals = body_on(ext, Y, sub_path).max(axis=1)
            best = np.maximum(best, vals)
            continue
        if anchors:
            A = np.tile(np.asarray(anchors, dtype=np.float64)[None, :, :], (B, 1, 1))
            best = np.maximum(best, body_on(ext, A, sub_path).max(axis=1))
        S = 1 if feature_free else ctrl.sup_points
        if feature_free and not anchors:
            Y = np.zeros((B, 1, d))
            best = np.maximum(best, body_on(ext, Y, sub_path).max(axis=1))
            continue
        if feature_free:
            continue  # anchors already probed; features are irrelevant anyway
        draw_rng = rng.split(*sub_path)
        chunk = max(1, min(S, int(4e6 // max(B, 1))))
        done = 0
        ci = 0
        while done < S:
            s = min(chunk, S - done)
            Y = ctrl.D.sample(draw_rng.split(ci), B * s).reshape(B, s, d)
            best = np.maximum(best, body_on(ext, Y, sub_path).max(axis=1))
            done += s
            ci += 1
    return best


def controller_value(ctrl: DenseController, gtype: GraphType, x, rng) -> float:
    """Numeric lambda value at one feature tuple for one type; deterministic
    given the stream."""
    k = ctrl.k
    if gtype.k != k:
        raise DenseError(f"type has {gtype.k} variables, term has {k}")
    d = ctrl.D.d
    X = np.asarray(x, dtype=np.float64).reshape(1, k, d) if k else np.zeros((1, 0, d))
    slots = {v: i for i, v in enumerate(ctrl._fv)}
    return float(_controller_eval(ctrl, ctrl.term, gtype, slots, X, rng, (0,))[0])


def controller_constant(ctrl: DenseController, rng) -> float:
    """Controller value of a closed term (the limit constant)."""
    if ctrl.k != 0:
        raise DenseError("controller_constant requires a closed term")
    return controller_value(ctrl, EMPTY_TYPE, np.zeros((0, ctrl.D.d)), rng)
