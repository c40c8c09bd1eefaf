"""Multi-rooted featured graphs and their structural operations."""

from __future__ import annotations

import json
import math
from collections import deque

import numpy as np


class GraphError(Exception):
    pass


class MRFG:
    """Finite simple graph + ordered root list + per-vertex feature vectors.

    Immutable after construction; vertex ids are 0..n-1. ``feature_box`` is a
    tuple of (lo, hi) intervals, one per feature coordinate, containing every
    feature in the graph.
    """

    __slots__ = ("n", "edges", "roots", "features", "feature_box",
                 "_neighbors", "_indptr", "_indices")

    def __init__(self, n, edges, roots=(), features=None, feature_box=None):
        self.n = int(n)
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i},{j}) outside [0,{self.n})")
            canon.add((min(i, j), max(i, j)))
        self.edges = tuple(sorted(canon))
        self.roots = tuple(int(r) for r in roots)
        for r in self.roots:
            if not (0 <= r < self.n):
                raise GraphError(f"root {r} outside [0,{self.n})")
        if features is None:
            features = np.zeros((self.n, 0))
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise GraphError(f"features must be ({self.n}, d), got {feats.shape}")
        feats = np.ascontiguousarray(feats)
        feats.setflags(write=False)
        self.features = feats
        d = feats.shape[1]
        if feature_box is None:
            if d and self.n:
                feature_box = tuple(
                    (float(feats[:, i].min()), float(feats[:, i].max()))
                    for i in range(d))
            else:
                feature_box = tuple(((0.0, 1.0),) * d)
        self.feature_box = tuple((float(lo), float(hi)) for lo, hi in feature_box)
        if len(self.feature_box) != d:
            raise GraphError("feature_box dimension mismatch")
        self._neighbors = None
        self._indptr = None
        self._indices = None

    # -- derived structure ------------------------------------------------

    @property
    def d(self):
        return self.features.shape[1]

    def neighbors(self, v):
        if self._neighbors is None:
            adj = [[] for _ in range(self.n)]
            for i, j in self.edges:
                adj[i].append(j)
                adj[j].append(i)
            self._neighbors = tuple(tuple(sorted(a)) for a in adj)
        return self._neighbors[v]

    def csr(self):
        """(indptr, indices) with sorted neighbor lists, for the kernels."""
        if self._indptr is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            for v in range(self.n):
                indptr[v + 1] = indptr[v] + len(self.neighbors(v))
            indices = np.empty(indptr[-1], dtype=np.int64)
            for v in range(self.n):
                indices[indptr[v]:indptr[v + 1]] = self.neighbors(v)
            self._indptr, self._indices = indptr, indices
        return self._indptr, self._indices

    def degree(self, v):
        return len(self.neighbors(v))

    def has_edge(self, u, v):
        return v in self.neighbors(u)

    def __eq__(self, other):
        return (isinstance(other, MRFG) and self.n == other.n
                and self.edges == other.edges and self.roots == other.roots
                and np.array_equal(self.features, other.features))

    def __hash__(self):
        return hash((self.n, self.edges, self.roots, self.features.tobytes()))

    def __repr__(self):
        return (f"MRFG(n={self.n}, m={len(self.edges)}, roots={list(self.roots)}, "
                f"d={self.d})")

    # -- serialization -----------------------------------------------------

    def to_json(self):
        return json.dumps({
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "roots": list(self.roots),
            "features": [list(map(float, row)) for row in self.features],
        })

    @staticmethod
    def from_json(text, feature_box=None):
        obj = json.loads(text)
        return MRFG(obj["n"], [tuple(e) for e in obj["edges"]], obj.get("roots", ()),
                    np.asarray(obj["features"], dtype=np.float64).reshape(obj["n"], -1)
                    if obj.get("features") else None,
                    feature_box=feature_box)


def append_root(g: MRFG, v: int) -> MRFG:
    if not (0 <= v < g.n):
        raise GraphError(f"vertex {v} outside [0,{g.n})")
    out = MRFG.__new__(MRFG)
    out.n = g.n
    out.edges = g.edges
    out.roots = g.roots + (v,)
    out.features = g.features
    out.feature_box = g.feature_box
    out._neighbors = g._neighbors
    out._indptr = g._indptr
    out._indices = g._indices
    return out


def max_degree(g: MRFG) -> int:
    return max((g.degree(v) for v in range(g.n)), default=0)


def _bfs_dist(g: MRFG, sources, cap=None):
    """Distances from a source set; unreached entries are inf."""
    dist = [math.inf] * g.n
    q = deque()
    for s in sources:
        if dist[s] != 0:
            dist[s] = 0
            q.append(s)
    while q:
        v = q.popleft()
        if cap is not None and dist[v] >= cap:
            continue
        for w in g.neighbors(v):
            if dist[w] == math.inf:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist


def distance(g: MRFG, u: int, v: int):
    """BFS shortest-path length, math.inf when disconnected."""
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise GraphError("invalid vertex id")
    if u == v:
        return 0
    return _bfs_dist(g, [u])[v]


def induced(g: MRFG, kept, roots=None) -> MRFG:
    """Induced sub-MRFG on ``kept`` (made sorted, so relative vertex order
    and hence summation order is preserved)."""
    kept = sorted(set(kept))
    index = {v: i for i, v in enumerate(kept)}
    edges = [(index[i], index[j]) for i, j in g.edges if i in index and j in index]
    if roots is None:
        roots = g.roots
    feats = g.features[kept] if kept else np.zeros((0, g.d))
    return MRFG(len(kept), edges, tuple(index[r] for r in roots), feats,
                feature_box=g.feature_box)


def ball(g: MRFG, v: int, r: int) -> MRFG:
    """Sub-MRFG induced on vertices within distance r of v, rooted at v only."""
    if not (0 <= v < g.n):
        raise GraphError(f"vertex {v} outside [0,{g.n})")
    dist = _bfs_dist(g, [v], cap=r)
    kept = [u for u in range(g.n) if dist[u] <= r]
    return induced(g, kept, roots=(v,))


def short_cycle_vertices(g: MRFG, L: int) -> frozenset:
    """Vertices lying on some simple cycle of length <= L.

    An edge (u,v) lies on a cycle of length <= L iff u and v are still at
    distance <= L-1 after removing that edge; every cycle vertex has such an
    incident edge.
    """
    if L < 3:
        return frozenset()
    out = set()
    for (u, v) in g.edges:
        if u in out and v in out:
            continue
        # BFS from u to v in g minus the edge (u,v), depth cap L-1
        dist = {u: 0}
        q = deque([u])
        found = False
        while q and not found:
            x = q.popleft()
            if dist[x] >= L - 1:
                continue
            for w in g.neighbors(x):
                if x == u and w == v:
                    continue
                if w not in dist:
                    dist[w] = dist[x] + 1
                    if w == v:
                        found = True
                        break
                    q.append(w)
        if found:
            out.add(u)
            out.add(v)
    return frozenset(out)


def core(g: MRFG, r: int) -> MRFG:
    """Induced sub-MRFG on vertices within distance r of a root or of a
    cycle of length <= 2r+1; the root list is preserved."""
    sources = set(g.roots) | set(short_cycle_vertices(g, 2 * r + 1))
    if not sources:
        return induced(g, [], roots=g.roots)
    dist = _bfs_dist(g, sorted(sources), cap=r)
    kept = [v for v in range(g.n) if dist[v] <= r]
    return induced(g, kept, roots=g.roots)


def disjoint_union(g: MRFG, h: MRFG) -> MRFG:
    """Vertex-disjoint union; h's vertices are shifted by g.n and the root
    lists concatenate in order."""
    if g.d != h.d:
        raise GraphError(f"feature dimension mismatch: {g.d} vs {h.d}")
    edges = list(g.edges) + [(i + g.n, j + g.n) for i, j in h.edges]
    roots = g.roots + tuple(r + g.n for r in h.roots)
    feats = np.concatenate([g.features, h.features], axis=0)
    box = tuple((min(a, c), max(b, d))
                for (a, b), (c, d) in zip(g.feature_box, h.feature_box))
    return MRFG(g.n + h.n, edges, roots, feats, feature_box=box)


def empty_graph(d=0, feature_box=None) -> MRFG:
    return MRFG(0, [], (), np.zeros((0, d)),
                feature_box=feature_box if feature_box is not None else ((0.0, 1.0),) * d)


# ---------------------------------------------------------------------------
# canonical forms (exact isomorphism keys for small graphs)

def canonical_key(g: MRFG, with_features=True, feature_key=None):
    """Canonical bytes-key: equal keys iff isomorphic (respecting root order
    and, optionally, exact features or ``feature_key(vector)`` labels).

    Color refinement plus backtracking over the smallest ambiguous cell;
    exact at any size, intended for desk-scale graphs.
    """
    n = g.n
    if feature_key is None:
        feature_key = (lambda row: tuple(row)) if with_features else (lambda row: ())
    root_pos = [tuple(i for i, r in enumerate(g.roots) if r == v) for v in range(n)]
    base = [(root_pos[v], feature_key(g.features[v]), g.degree(v)) for v in range(n)]
    order = sorted(range(n), key=lambda v: base[v])
    color = {}
    init = [0] * n
    for v in order:
        init[v] = color.setdefault(base[v], len(color))

    def refine(col):
        col = list(col)
        while True:
            sig = [(col[v], tuple(sorted(col[w] for w in g.neighbors(v))))
                   for v in range(n)]
            mapping = {}
            new = [0] * n
            for v in sorted(range(n), key=lambda v: sig[v]):
                new[v] = mapping.setdefault(sig[v], len(mapping))
            if new == col:
                return col
            col = new

    def encode(perm_order):
        pos = {v: i for i, v in enumerate(perm_order)}
        edges = sorted((min(pos[i], pos[j]), max(pos[i], pos[j])) for i, j in g.edges)
        labels = tuple(base[v][:2] for v in perm_order)
        return (n, tuple(edges), tuple(pos[r] for r in g.roots), labels)

    best = [None]

    def search(col):
        col = refine(col)
        cells = {}
        for v in range(n):
            cells.setdefault(col[v], []).append(v)
        ambiguous = [vs for vs in cells.values() if len(vs) > 1]
        if not ambiguous:
            order = sorted(range(n), key=lambda v: col[v])
            code = encode(order)
            if best[0] is None or code < best[0]:
                best[0] = code
            return
        cell = min(ambiguous, key=len)
        nxt = max(col) + 1
        for v in cell:
            col2 = list(col)
            col2[v] = nxt
            search(col2)

    if n == 0:
        return repr((0, (), tuple(), ())).encode()
    search(init)
    return repr(best[0]).encode()


def rooted_tree_key(g: MRFG, feature_key=None):
    """Linear-time canonical key for single-rooted trees (AHU encoding with
    feature labels); used for tree pool dedup."""
    assert len(g.roots) == 1
    if feature_key is None:
        feature_key = lambda row: tuple(row)

    def enc(v, parent):
        kids = sorted(enc(w, v) for w in g.neighbors(v) if w != parent)
        return (feature_key(g.features[v]), tuple(kids))

    return repr(enc(g.roots[0], -1)).encode()


def is_tree(g: MRFG) -> bool:
    if g.n == 0:
        return True
    if len(g.edges) != g.n - 1:
        return False
    dist = _bfs_dist(g, [0])
    return all(d != math.inf for d in dist)


def tree_height(g: MRFG) -> int:
    """Height of a single-rooted tree (max root distance)."""
    assert len(g.roots) == 1
    dist = _bfs_dist(g, [g.roots[0]])
    return int(max(dist)) if g.n else 0
