"""Similarity games on MRFGs, exact coupling machinery and partition lifting.

The relation similar(g, h, (k, eps, eta)) is decided literally from its
inductive definition: partial isomorphism with eps-close root features at
k=0; back-and-forth plus a neighborhood coupling condition at k>=1. The
coupling condition quantifies over all couplings, which for finite uniform
marginals is a maximum-flow problem solved exactly in rational arithmetic.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class GameError(Exception):
    pass


@dataclass(frozen=True)
class GameParams:
    k: int
    epsilon: float
    eta: float

    def __post_init__(self):
        if self.k < 0 or self.epsilon <= 0 or not (0 < self.eta <= 1):
            raise GameError(f"bad game parameters {self}")


# ---------------------------------------------------------------------------
# exact max-flow on small bipartite instances

def _max_flow(nA, nB, caps_a, caps_b, pairs):
    """Max flow source -> a_i -> b_j -> sink; capacities are Fractions,
    relation edges unbounded. Returns the flow value."""
    S, T = 0, 1 + nA + nB
    nv = T + 1
    cap = {}

    def add(u, v, c):
        cap[(u, v)] = cap.get((u, v), Fraction(0)) + c
        cap.setdefault((v, u), Fraction(0))

    inf = Fraction(2)
    for i, c in enumerate(caps_a):
        add(S, 1 + i, c)
    for j, c in enumerate(caps_b):
        add(1 + nA + j, T, c)
    for (i, j) in pairs:
        add(1 + i, 1 + nA + j, inf)
    adj = {}
    for (u, v) in cap:
        adj.setdefault(u, []).append(v)
    flow = Fraction(0)
    while True:
        # BFS for an augmenting path
        parent = {S: None}
        q = deque([S])
        while q and T not in parent:
            u = q.popleft()
            for v in adj.get(u, ()):
                if v not in parent and cap[(u, v)] > 0:
                    parent[v] = u
                    q.append(v)
        if T not in parent:
            return flow
        # bottleneck
        path = []
        v = T
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        aug = min(cap[e] for e in path)
        for (u, v) in path:
            cap[(u, v)] -= aug
            cap[(v, u)] += aug
        flow += aug


def max_coupling_mass(left, right, relation) -> Fraction:
    """Maximum of Pr(pair in relation) over couplings of two finite weighted
    sets (weights must each sum to 1, exactly).

    ``left``/``right`` are sequences of (element, weight); ``relation`` is a
    set of (left element, right element) pairs or a predicate.
    """
    wa = [Fraction(w) for _, w in left]
    wb = [Fraction(w) for _, w in right]
    if sum(wa) != 1 or sum(wb) != 1:
        raise GameError("coupling marginals must sum to 1")
    rel = relation if callable(relation) else (lambda a, b: (a, b) in relation)
    pairs = [(i, j) for i, (a, _) in enumerate(left)
             for j, (b, _) in enumerate(right) if rel(a, b)]
    return _max_flow(len(left), len(right), wa, wb, pairs)


# ---------------------------------------------------------------------------
# the similarity relation

def _partial_iso(g, h):
    rg, rh = g.roots, h.roots
    for i in range(len(rg)):
        for j in range(i, len(rg)):
            if (rg[i] == rg[j]) != (rh[i] == rh[j]):
                return False
            if g.has_edge(rg[i], rg[j]) != h.has_edge(rh[i], rh[j]):
                return False
    return True


def _features_close(g, h, eps):
    if g.d == 0:
        return True
    for vg, uh in zip(g.roots, h.roots):
        if np.max(np.abs(g.features[vg] - h.features[uh]), initial=0.0) > eps:
            return False
    return True


class _GameCtx:
    __slots__ = ("g", "h", "eps", "eta_frac", "memo")

    def __init__(self, g, h, eps, eta):
        self.g = g
        self.h = h
        self.eps = eps
        self.eta_frac = Fraction(eta)
        self.memo = {}


def _candidates(g, h, p, eps):
    """Order the answering side's vertices so that likely matches come
    first (pure heuristic, does not affect the decided relation)."""
    fp = g.features[p] if g.d else None
    degp = g.degree(p)

    def score(q):
        fd = float(np.max(np.abs(fp - h.features[q]), initial=0.0)) if g.d else 0.0
        return (fd > eps, abs(degp - h.degree(q)), fd, q)

    return sorted(range(h.n), key=score)


def _sim(ctx, rg, rh, k):
    key = (rg, rh, k)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    ctx.memo[key] = False  # cycle guard; recursion is on decreasing k anyway
    res = _sim_compute(ctx, rg, rh, k)
    ctx.memo[key] = res
    return res


def _sim_compute(ctx, rg, rh, k):
    g, h = ctx.g, ctx.h
    if k == 0:
        gg = _with_roots(g, rg)
        hh = _with_roots(h, rh)
        return _partial_iso(gg, hh) and _features_close(gg, hh, ctx.eps)
    # back-and-forth
    for p in range(g.n):
        if not any(_sim(ctx, rg + (p,), rh + (q,), k - 1)
                   for q in _candidates(g, h, p, ctx.eps)):
            return False
    for q in range(h.n):
        if not any(_sim(ctx, rg + (p,), rh + (q,), k - 1)
                   for p in _candidates(h, g, q, ctx.eps)):
            return False
    # neighborhood coupling per root index
    for i in range(len(rg)):
        ng = g.neighbors(rg[i])
        nh = h.neighbors(rh[i])
        if (len(ng) == 0) != (len(nh) == 0):
            return False
        if len(ng) == 0:
            continue
        wg = Fraction(1, len(ng))
        wh = Fraction(1, len(nh))
        pairs = [(a, b) for ia, a in enumerate(ng) for ib, b in enumerate(nh)
                 if _sim(ctx, rg + (a,), rh + (b,), k - 1)]
        idx_a = {a: ia for ia, a in enumerate(ng)}
        idx_b = {b: ib for ib, b in enumerate(nh)}
        flow = _max_flow(len(ng), len(nh), [wg] * len(ng), [wh] * len(nh),
                         [(idx_a[a], idx_b[b]) for a, b in pairs])
        if flow < 1 - ctx.eta_frac:
            return False
    return True


def _with_roots(g, roots):
    from .graphs import MRFG
    out = MRFG.__new__(MRFG)
    out.n = g.n
    out.edges = g.edges
    out.roots = tuple(roots)
    out.features = g.features
    out.feature_box = g.feature_box
    out._neighbors = g._neighbors
    out._indptr = g._indptr
    out._indices = g._indices
    return out


def similar(g, h, params: GameParams) -> bool:
    """Whether g and h are related at (k, epsilon, eta)."""
    if len(g.roots) != len(h.roots):
        raise GameError("root count mismatch")
    ctx = _GameCtx(g, h, params.epsilon, params.eta)
    return _sim(ctx, g.roots, h.roots, params.k)


# ---------------------------------------------------------------------------
# explicit coupling construction

@dataclass
class CouplingTable:
    """Finite coupling with exact rational weights.

    ``weights[(a, b)]`` is the joint mass on the pair; marginals reproduce
    the two inputs exactly.
    """
    left: tuple
    right: tuple
    weights: dict
    diagonal_mass: Fraction

    def left_marginal(self, a):
        return sum((w for (x, _), w in self.weights.items() if x == a), Fraction(0))

    def right_marginal(self, b):
        return sum((w for (_, y), w in self.weights.items() if y == b), Fraction(0))

    def total(self):
        return sum(self.weights.values(), Fraction(0))

    def mass_on(self, predicate):
        return sum((w for (a, b), w in self.weights.items() if predicate(a, b)),
                   Fraction(0))


class CouplingPreconditionError(GameError):
    pass


def construct_coupling(x0, x1, partition, t_cell, nu, nu_prime) -> CouplingTable:
    """Explicit coupling of two finite weighted sets that lands inside the
    partition diagonal with mass >= 1 - nu - nu_prime.

    ``x0``/``x1``: sequences of (element, weight); ``partition``: list of
    element sets S_1..S_l; ``t_cell``: the leftover set T. Per-cell masses
    must differ by at most nu/l and the T masses must sum to at most
    nu_prime, both checked exactly.
    """
    nu = Fraction(nu)
    nu_prime = Fraction(nu_prime)
    cells = [frozenset(S) for S in partition]
    t_cell = frozenset(t_cell)
    ell = len(cells)
    w0 = {e: Fraction(wt) for e, wt in x0}
    w1 = {e: Fraction(wt) for e, wt in x1}
    if sum(w0.values()) != 1 or sum(w1.values()) != 1:
        raise CouplingPreconditionError("weights must sum to 1")

    def mass(w, cell):
        return sum((w[e] for e in w if e in cell), Fraction(0))

    m0 = [mass(w0, S) for S in cells] + [mass(w0, t_cell)]
    m1 = [mass(w1, S) for S in cells] + [mass(w1, t_cell)]
    covered0 = sum(m0, Fraction(0))
    covered1 = sum(m1, Fraction(0))
    if covered0 != 1 or covered1 != 1:
        raise CouplingPreconditionError("partition plus T must cover the supports")
    for i in range(ell):
        if abs(m0[i] - m1[i]) * ell > nu:
            raise CouplingPreconditionError(
                f"cell {i}: |{m0[i]} - {m1[i]}| > nu/l = {nu}/{ell}")
    if m0[ell] + m1[ell] > nu_prime:
        raise CouplingPreconditionError(
            f"T masses {m0[ell]} + {m1[ell]} exceed nu' = {nu_prime}")

    # q_i = min cell mass, p_{j,i} = positive part of the difference;
    # T is cell l+1 with q = 0
    q = [min(m0[i], m1[i]) for i in range(ell)] + [Fraction(0)]
    p0 = [max(Fraction(0), m0[i] - m1[i]) for i in range(ell)] + [m0[ell]]
    p1 = [max(Fraction(0), m1[i] - m0[i]) for i in range(ell)] + [m1[ell]]
    p = 1 - sum(q[:ell], Fraction(0))
    all_cells = cells + [t_cell]

    def conditional(w, cell, cell_mass):
        return {e: w[e] / cell_mass for e in w if e in cell and w[e] > 0}

    weights = {}
    for i in range(ell):
        if q[i] == 0:
            continue
        c0 = conditional(w0, all_cells[i], m0[i])
        c1 = conditional(w1, all_cells[i], m1[i])
        for a, wa in c0.items():
            for b, wb in c1.items():
                weights[(a, b)] = weights.get((a, b), Fraction(0)) + q[i] * wa * wb
    if p > 0:
        for i0 in range(ell + 1):
            if p0[i0] == 0:
                continue
            c0 = conditional(w0, all_cells[i0], m0[i0])
            for i1 in range(ell + 1):
                if p1[i1] == 0:
                    continue
                c1 = conditional(w1, all_cells[i1], m1[i1])
                off = p0[i0] * p1[i1] / p
                for a, wa in c0.items():
                    for b, wb in c1.items():
                        weights[(a, b)] = weights.get((a, b), Fraction(0)) + off * wa * wb

    table = CouplingTable(tuple(e for e, _ in x0), tuple(e for e, _ in x1),
                          weights, sum(q[:ell], Fraction(0)))
    assert table.total() == 1
    return table


# ---------------------------------------------------------------------------
# feature partitions (uniform grids with zero-mass cells merged into T)

class FeaturePartition:
    """Uniform grid of mesh <= epsilon over a distribution's support box;
    cells with zero mass count as the leftover set T."""

    def __init__(self, distribution, epsilon):
        self.distribution = distribution
        self.epsilon = float(epsilon)
        self.box = distribution.support_box
        self.counts = []
        for lo, hi in self.box:
            width = hi - lo
            self.counts.append(max(1, int(math.ceil(width / self.epsilon - 1e-12))))
        self.cells = []
        self._index = {}
        for flat in range(int(np.prod(self.counts)) if self.counts else 1):
            idx = []
            rem = flat
            for c in reversed(self.counts):
                idx.append(rem % c)
                rem //= c
            idx = tuple(reversed(idx))
            lo = tuple(self.box[i][0] + (self.box[i][1] - self.box[i][0]) * idx[i] / self.counts[i]
                       for i in range(len(idx)))
            hi = tuple(self.box[i][0] + (self.box[i][1] - self.box[i][0]) * (idx[i] + 1) / self.counts[i]
                       for i in range(len(idx)))
            mass = distribution.cell_mass(lo, hi)
            self._index[idx] = len(self.cells)
            self.cells.append({"index": idx, "lo": lo, "hi": hi, "mass": mass})

    @property
    def mesh(self):
        return max(((hi - lo) / c for (lo, hi), c in zip(self.box, self.counts)),
                   default=0.0)

    def cell_of(self, x):
        """Cell id of a feature vector, or None for zero-mass cells (T)."""
        idx = []
        for i, (lo, hi) in enumerate(self.box):
            if hi == lo:
                idx.append(0)
                continue
            j = int((float(x[i]) - lo) / (hi - lo) * self.counts[i])
            idx.append(min(max(j, 0), self.counts[i] - 1))
        cid = self._index[tuple(idx)]
        return cid if self.cells[cid]["mass"] > 0 else None

    def snap(self, x):
        """Center of x's grid cell (used to put pool features on the grid)."""
        out = []
        for i, (lo, hi) in enumerate(self.box):
            if hi == lo:
                out.append(lo)
                continue
            w = (hi - lo) / self.counts[i]
            j = min(max(int((float(x[i]) - lo) / w), 0), self.counts[i] - 1)
            out.append(lo + (j + 0.5) * w)
        return tuple(out)


# ---------------------------------------------------------------------------
# partition lifting: finite classes refining the similarity relation

def lift_partition(collection, P: FeaturePartition, k: int, eta: float):
    """Class labels realizing the inductive refinement of ~_{k,eps,eta} on
    the given MRFGs (all with the same root count).

    Level-0 classes look at the root pattern and root feature cells; level-j
    classes combine the multiset of level-(j-1) classes over all single-root
    extensions with, per root, an isolation flag and the vector of
    neighborhood class proportions discretized at mesh eta/l, where l is the
    number of level-(j-1) classes realized across the collection.
    """
    if not collection:
        return [], LiftTable((), {}, [])
    m = len(collection[0].roots)
    if any(len(g.roots) != m for g in collection):
        raise GameError("collection must share the root count")
    eta = Fraction(eta)

    memo = {}

    def class0(g, gi, roots):
        pattern = []
        for i in range(len(roots)):
            for j in range(i + 1, len(roots)):
                pattern.append((roots[i] == roots[j],
                                g.has_edge(roots[i], roots[j])))
        cells = tuple(P.cell_of(g.features[v]) if g.d else 0 for v in roots)
        # isolation flags refine the base classes so that one-variable
        # extension multisets can tell an edge from two isolated vertices
        isolated = tuple(g.degree(v) == 0 for v in roots)
        return ("c0", tuple(pattern), cells, isolated)

    levels = []  # per level: {key -> class id}, plus representative tuples

    def assign(level, key, rep):
        table = levels[level]
        if key not in table["ids"]:
            table["ids"][key] = len(table["ids"])
            table["reps"].append(rep)
        return table["ids"][key]

    # bottom-up: level j classifies root tuples of length m + (k - j)
    for j in range(k + 1):
        levels.append({"ids": {}, "reps": []})
        for gi, g in enumerate(collection):
            for tup in _tuples(g, m, k - j):
                if j == 0:
                    key = class0(g, gi, tup)
                else:
                    prev = levels[j - 1]["ids"]
                    ell = max(1, len(prev))
                    mesh = eta / ell
                    kids = sorted(memo[(gi, tup + (v,), j - 1)] for v in range(g.n))
                    child_multiset = tuple(_multiset(kids))
                    root_info = []
                    for v in tup:
                        nb = g.neighbors(v)
                        if not nb:
                            root_info.append(("isolated",))
                            continue
                        counts = [0] * len(prev)
                        for w in nb:
                            counts[memo[(gi, tup + (w,), j - 1)]] += 1
                        cells = tuple(
                            int(Fraction(c, len(nb)) / mesh) if mesh > 0 else 0
                            for c in counts)
                        root_info.append(("nbhd", cells))
                    key = ("ck", child_multiset, tuple(root_info))
                memo[(gi, tup, j)] = assign(j, key, (gi, tup))

    labels = [memo[(gi, g.roots, k)] for gi, g in enumerate(collection)]
    return labels, LiftTable(tuple(levels[-1]["reps"]),
                             {i: rep for i, rep in enumerate(levels[-1]["reps"])},
                             [len(lv["ids"]) for lv in levels])


def _tuples(g, m, extra):
    base = g.roots
    out = [base]
    for _ in range(extra):
        out = [t + (v,) for t in out for v in range(g.n)]
    return out


def _multiset(sorted_items):
    out = []
    for x in sorted_items:
        if out and out[-1][0] == x:
            out[-1] = (x, out[-1][1] + 1)
        else:
            out.append((x, 1))
    return out


@dataclass
class LiftTable:
    representatives: tuple
    rep_by_class: dict
    class_counts_per_level: list
