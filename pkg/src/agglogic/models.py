"""Random models: featured Erdos-Renyi graphs, branching processes, random
cores, feature distributions and reproducible splittable random streams."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graphs import MRFG, disjoint_union, empty_graph


class ModelError(Exception):
    pass


# ---------------------------------------------------------------------------
# random streams
#
# A stream is (seed, path); same pair means the same draw sequence on every
# platform. Implemented on numpy's SeedSequence spawn keys.

class RngStream:
    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed, path=()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen = None

    def split(self, *tags) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(t) for t in tags))

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def uniform(self, size=None):
        return self.gen.random(size)

    def poisson(self, lam, size=None):
        return self.gen.poisson(lam, size)

    def integers(self, low, high, size=None):
        return self.gen.integers(low, high, size=size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={list(self.path)})"


# ---------------------------------------------------------------------------
# feature distributions

@dataclass(frozen=True)
class UniformBox:
    box: tuple  # ((lo, hi), ...) per coordinate


@dataclass(frozen=True)
class DiscreteMixture:
    atoms: tuple  # ((point tuple, Fraction weight), ...)


@dataclass(frozen=True)
class ProductOfCoordinates:
    coords: tuple  # one UniformBox (1-d) or DiscreteMixture (1-d) per coordinate


class FeatureDistribution:
    """Bounded-support distribution over R^d with a declared support box."""

    def __init__(self, kind):
        self.kind = kind
        if isinstance(kind, UniformBox):
            self.support_box = tuple((float(a), float(b)) for a, b in kind.box)
        elif isinstance(kind, DiscreteMixture):
            pts = [p for p, _ in kind.atoms]
            ws = [Fraction(w) for _, w in kind.atoms]
            if not pts:
                raise ModelError("discrete mixture needs at least one atom")
            if any(w <= 0 for w in ws) or sum(ws) != 1:
                raise ModelError("mixture weights must be positive and sum to 1")
            d = len(pts[0])
            self.support_box = tuple(
                (min(float(p[i]) for p in pts), max(float(p[i]) for p in pts))
                for i in range(d))
        elif isinstance(kind, ProductOfCoordinates):
            box = []
            for c in kind.coords:
                sub = FeatureDistribution(c)
                if sub.d != 1:
                    raise ModelError("product coordinates must be one-dimensional")
                box.append(sub.support_box[0])
            self.support_box = tuple(box)
        else:
            raise ModelError(f"unknown distribution kind {kind!r}")

    @property
    def d(self):
        return len(self.support_box)

    def sample(self, rng: RngStream, size=1) -> np.ndarray:
        """(size, d) array of i.i.d. draws."""
        k = self.kind
        if isinstance(k, UniformBox):
            lo = np.array([a for a, _ in k.box])
            hi = np.array([b for _, b in k.box])
            return lo + (hi - lo) * rng.uniform((size, len(k.box)))
        if isinstance(k, DiscreteMixture):
            pts = np.array([p for p, _ in k.atoms], dtype=np.float64)
            ws = np.array([float(Fraction(w)) for _, w in k.atoms])
            ws = ws / ws.sum()
            idx = rng.gen.choice(len(pts), size=size, p=ws)
            return pts[idx]
        cols = [FeatureDistribution(c).sample(rng.split(i), size)
                for i, c in enumerate(k.coords)]
        return np.concatenate(cols, axis=1)

    def cell_mass(self, cell_lo, cell_hi) -> Fraction:
        """Exact mass of the half-open box [lo, hi) (closed at the support
        box's upper face); used to flag zero-mass partition cells."""
        k = self.kind
        if isinstance(k, UniformBox):
            m = Fraction(1)
            for i, (a, b) in enumerate(k.box):
                lo = max(float(cell_lo[i]), a)
                hi = min(float(cell_hi[i]), b)
                if b == a:
                    if not (lo <= a <= hi):
                        return Fraction(0)
                    continue
                if hi <= lo:
                    return Fraction(0)
                m *= Fraction(hi - lo) / Fraction(b - a)
            return m
        if isinstance(k, DiscreteMixture):
            total = Fraction(0)
            top = self.support_box
            for p, w in k.atoms:
                inside = all(
                    cell_lo[i] <= p[i] < cell_hi[i]
                    or (p[i] == cell_hi[i] and cell_hi[i] >= top[i][1])
                    for i in range(len(p)))
                if inside:
                    total += Fraction(w)
            return total
        m = Fraction(1)
        for i, c in enumerate(k.coords):
            m *= FeatureDistribution(c).cell_mass((cell_lo[i],), (cell_hi[i],))
        return m

    def mean(self) -> np.ndarray:
        k = self.kind
        if isinstance(k, UniformBox):
            return np.array([(a + b) / 2 for a, b in k.box])
        if isinstance(k, DiscreteMixture):
            pts = np.array([p for p, _ in k.atoms], dtype=np.float64)
            ws = np.array([float(Fraction(w)) for _, w in k.atoms])
            return ws @ pts
        return np.array([FeatureDistribution(c).mean()[0] for c in k.coords])

    @staticmethod
    def uniform01(d=1):
        return FeatureDistribution(UniformBox(tuple(((0.0, 1.0),) * d)))

    @staticmethod
    def point(values=(0.0,)):
        return FeatureDistribution(DiscreteMixture(((tuple(values), Fraction(1)),)))

    # -- config JSON -------------------------------------------------------

    @staticmethod
    def from_config(obj) -> "FeatureDistribution":
        if isinstance(obj, str):
            obj = json.loads(obj)
        kind = obj["kind"]
        if kind == "uniform_box":
            return FeatureDistribution(UniformBox(tuple(tuple(iv) for iv in obj["box"])))
        if kind == "discrete":
            atoms = tuple((tuple(a["point"]), Fraction(a["weight"]))
                          for a in obj["atoms"])
            return FeatureDistribution(DiscreteMixture(atoms))
        if kind == "product":
            coords = tuple(FeatureDistribution.from_config(c).kind for c in obj["coords"])
            return FeatureDistribution(ProductOfCoordinates(coords))
        raise ModelError(f"unknown distribution kind {kind!r}")

    def to_config(self):
        k = self.kind
        if isinstance(k, UniformBox):
            return {"kind": "uniform_box", "box": [list(iv) for iv in k.box]}
        if isinstance(k, DiscreteMixture):
            return {"kind": "discrete",
                    "atoms": [{"point": list(p), "weight": str(Fraction(w))}
                              for p, w in k.atoms]}
        return {"kind": "product",
                "coords": [FeatureDistribution(c).to_config() for c in k.coords]}


# ---------------------------------------------------------------------------
# model specs

@dataclass(frozen=True)
class Dense:
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ModelError(f"dense p={self.p} outside [0,1]")

    def edge_probability(self, n):
        return self.p


@dataclass(frozen=True)
class LinearSparse:
    c: float

    def __post_init__(self):
        if self.c <= 0:
            raise ModelError(f"sparse c={self.c} must be positive")

    def edge_probability(self, n):
        p = self.c / n
        if p > 1.0:
            raise ModelError(f"c/n = {p} exceeds 1 at n={n}")
        return p


def model_from_config(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj["kind"] == "dense":
        return Dense(float(obj["p"]))
    if obj["kind"] == "linear_sparse":
        return LinearSparse(float(obj["c"]))
    raise ModelError(f"unknown model kind {obj['kind']!r}")


def model_to_config(spec):
    if isinstance(spec, Dense):
        return {"kind": "dense", "p": spec.p}
    return {"kind": "linear_sparse", "c": spec.c}


# ---------------------------------------------------------------------------
# samplers

def _sparse_edge_sample(n, p, rng: RngStream):
    """Geometric skipping over the C(n,2) pair indices; O(n + m) draws."""
    total = n * (n - 1) // 2
    edges = []
    if p <= 0 or total == 0:
        return edges
    if p >= 1.0:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    log1p = math.log1p(-p)
    idx = -1
    gen = rng.gen
    while True:
        u = gen.random()
        idx += 1 + int(math.floor(math.log(1.0 - u) / log1p))
        if idx >= total:
            break
        # flat index -> (i, j), i < j, row-major over the strict upper triangle
        i = max(0, int((2 * n - 1 - math.sqrt((2 * n - 1) ** 2 - 8 * idx)) // 2))
        while _row_start(i + 1, n) <= idx:
            i += 1
        while _row_start(i, n) > idx:
            i -= 1
        j = idx - _row_start(i, n) + i + 1
        edges.append((i, j))
    return edges


def _row_start(i, n):
    return i * n - i * (i + 1) // 2


def sample_graph(spec, n, D: FeatureDistribution, rng: RngStream) -> MRFG:
    """A rootless featured graph: pairwise-independent edges, i.i.d. features
    independent of the edges."""
    if n < 1:
        raise ModelError("n must be >= 1")
    p = spec.edge_probability(n)
    edge_rng, feat_rng = rng.split(0), rng.split(1)
    if isinstance(spec, Dense):
        if p <= 0:
            edges = []
        elif p >= 1:
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
        else:
            iu, ju = np.triu_indices(n, k=1)
            mask = edge_rng.uniform(iu.shape[0]) < p
            edges = list(zip(iu[mask].tolist(), ju[mask].tolist()))
    else:
        edges = _sparse_edge_sample(n, p, edge_rng)
    feats = D.sample(feat_rng, n)
    return MRFG(n, edges, (), feats, feature_box=D.support_box)


def sample_fbp(c, D: FeatureDistribution, r, rng: RngStream) -> MRFG:
    """Featured branching process truncated to the first r generations:
    Poisson(c) offspring, i.i.d. features, single root 0."""
    if c <= 0:
        raise ModelError("c must be positive")
    gen = rng.split(0).gen
    parents = [0]
    n = 1
    frontier = [0]
    for _ in range(r):
        nxt = []
        if not frontier:
            break
        counts = gen.poisson(c, len(frontier))
        for v, k in zip(frontier, counts):
            for _ in range(int(k)):
                parents.append(v)
                nxt.append(n)
                n += 1
        frontier = nxt
    edges = [(parents[v], v) for v in range(1, n)]
    feats = D.sample(rng.split(1), n)
    return MRFG(n, edges, (0,), feats, feature_box=D.support_box)


def sample_core(r, c, D: FeatureDistribution, rng: RngStream) -> MRFG:
    """Random r-core: Poisson(c^i/2i) disjoint i-cycles for each 3 <= i <= r,
    with an independent height-r branching-process tree hung from every cycle
    vertex. Rootless."""
    if c <= 0:
        raise ModelError("c must be positive")
    if r < 0:
        raise ModelError("r must be >= 0")
    parts = []
    cycle_rng = rng.split(0)
    for i in range(3, r + 1):
        m = int(cycle_rng.split(i).gen.poisson(c ** i / (2 * i)))
        for j in range(m):
            parts.append((i, rng.split(1, i, j)))
    pieces = []
    for i, piece_rng in parts:
        # an i-cycle whose vertices each grow a BP|_r tree
        edges = [(k, (k + 1) % i) for k in range(i)]
        n = i
        feats = [None] * i
        for k in range(i):
            tree = sample_fbp(c, D, r, piece_rng.split(k))
            # identify tree root with cycle vertex k
            feats[k] = tree.features[0]
            remap = {0: k}
            for v in range(1, tree.n):
                remap[v] = n
                n += 1
                feats.append(tree.features[v])
            for a, b in tree.edges:
                edges.append((remap[a], remap[b]))
        pieces.append(MRFG(n, edges, (), np.array(feats).reshape(n, -1) if n else None,
                           feature_box=D.support_box))
    if not pieces:
        return empty_graph(D.d, D.support_box)
    out = pieces[0]
    for p in pieces[1:]:
        out = disjoint_union(out, p)
    return out


def sample_feature(D: FeatureDistribution, rng: RngStream) -> np.ndarray:
    return D.sample(rng, 1)[0]
