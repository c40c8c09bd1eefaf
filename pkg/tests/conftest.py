import itertools

import numpy as np
import pytest

from agglogic.graphs import MRFG
from agglogic.models import FeatureDistribution, RngStream
from agglogic import terms as T


def random_mrfg(gen, n, d=1, p=0.3, roots=0):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if gen.random() < p]
    feats = gen.random((n, d))
    rts = tuple(int(gen.integers(0, n)) for _ in range(roots)) if n else ()
    return MRFG(n, edges, rts, feats, feature_box=((0.0, 1.0),) * d)


def all_labeled_graphs(n):
    pairs = list(itertools.combinations(range(n), 2))
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        yield MRFG(n, [e for e, b in zip(pairs, bits) if b], (),
                   np.zeros((n, 0)))


# -- brute-force first-order model checking --------------------------------

def fo_holds(phi, g, assign=None):
    assign = assign or {}
    if isinstance(phi, T.FOEdge):
        return g.has_edge(assign[phi.a], assign[phi.b])
    if isinstance(phi, T.FOEq):
        return assign[phi.a] == assign[phi.b]
    if isinstance(phi, T.FONot):
        return not fo_holds(phi.sub, g, assign)
    if isinstance(phi, T.FOAnd):
        return fo_holds(phi.a, g, assign) and fo_holds(phi.b, g, assign)
    if isinstance(phi, T.FOOr):
        return fo_holds(phi.a, g, assign) or fo_holds(phi.b, g, assign)
    if isinstance(phi, T.FOExists):
        return any(fo_holds(phi.sub, g, {**assign, phi.var: v})
                   for v in range(g.n))
    if isinstance(phi, T.FOForall):
        return all(fo_holds(phi.sub, g, {**assign, phi.var: v})
                   for v in range(g.n))
    raise AssertionError(phi)


def random_sentence(gen, max_quantifiers=3):
    """Closed FO sentence with at most the given quantifier depth."""
    names = ["u", "v", "w"][:max_quantifiers]

    def matrix(scope, budget):
        if budget == 0 or (len(scope) >= 2 and gen.random() < 0.45):
            a, b = (names[int(gen.integers(0, len(scope)))] for _ in range(2))
            atom = T.FOEdge(a, b) if gen.random() < 0.7 else T.FOEq(a, b)
            return atom
        roll = gen.random()
        if roll < 0.25 and len(scope) < len(names):
            var = names[len(scope)]
            sub = matrix(scope + [var], budget - 1)
            return T.FOExists(var, sub) if gen.random() < 0.6 else T.FOForall(var, sub)
        if roll < 0.5:
            return T.FONot(matrix(scope, budget - 1))
        ctor = T.FOAnd if roll < 0.75 else T.FOOr
        return ctor(matrix(scope, budget - 1), matrix(scope, budget - 1))

    var = names[0]
    body = matrix([var], max_quantifiers - 1)
    phi = T.FOExists(var, body) if gen.random() < 0.6 else T.FOForall(var, body)
    assert not T.fo_free_vars(phi)
    return phi


# -- random terms for battery-style tests ----------------------------------

def random_term(gen, depth=2, scope=(), d=1, allow_mean=True):
    """Random closed-ish term over scope; aggregator depth at most depth."""
    names = ["x", "y", "z", "q"]
    if depth == 0 or (scope and gen.random() < 0.4):
        roll = gen.random()
        if roll < 0.35 and scope:
            return T.Val(int(gen.integers(1, d + 1)), scope[int(gen.integers(0, len(scope)))])
        if roll < 0.55 and len(scope) >= 2:
            a, b = (scope[int(gen.integers(0, len(scope)))] for _ in range(2))
            return T.Edge(a, b) if gen.random() < 0.7 else T.Eq(a, b)
        if roll < 0.7:
            return T.Const(round(float(gen.random()), 3))
        if scope:
            return T.Val(int(gen.integers(1, d + 1)), scope[int(gen.integers(0, len(scope)))])
        return T.Const(round(float(gen.random()), 3))
    roll = gen.random()
    var = names[len(scope) % len(names)] + str(len(scope))
    if roll < 0.25 and allow_mean:
        return T.Mean(var, random_term(gen, depth - 1, scope + (var,), d, allow_mean))
    if roll < 0.5 and scope:
        anchor = scope[int(gen.integers(0, len(scope)))]
        return T.LMean(var, anchor, random_term(gen, depth - 1, scope + (var,), d, allow_mean))
    if roll < 0.7:
        return T.Sup(var, random_term(gen, depth - 1, scope + (var,), d, allow_mean))
    fn = ["not", "and", "or", "min", "max", "abs", "clip01"][int(gen.integers(0, 7))]
    entry = T.DEFAULT_REGISTRY[fn]
    args = tuple(random_term(gen, depth - 1, scope, d, allow_mean)
                 for _ in range(entry.arity))
    return T.Apply(fn, args)


@pytest.fixture
def uniform1():
    return FeatureDistribution.uniform01(1)


@pytest.fixture
def rng():
    return RngStream(20260809)
