import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agglogic import terms as T
from agglogic.terms import (ArityMismatchError, Const, Edge, Eq, LMean, Mean,
                            Sup, TermSyntaxError, UnboundAnchorError,
                            UnknownFunctionError, Val, compile_fo, free_vars,
                            metrics, parse_term, to_text)


def test_parse_atomic():
    assert parse_term("val1(u)") == Val(1, "u")
    assert parse_term("E(u,v)") == Edge("u", "v")
    assert parse_term("u = v") == Eq("u", "v")
    assert parse_term("0.25") == Const(0.25)


def test_parse_nested_aggregators():
    t = parse_term("mean u . lmean v ~ u . val1(v)")
    assert t == Mean("u", LMean("v", "u", Val(1, "v")))


def test_parse_shadowing_renames():
    t = parse_term("mean u . mean u . val1(u)")
    assert isinstance(t, Mean) and isinstance(t.body, Mean)
    assert t.var != t.body.var
    assert t.body.body.var == t.body.var


def test_parse_roundtrip():
    texts = [
        "mean u . lmean v ~ u . val1(v)",
        "sup u . and(E(u,v), not(u = v))",
        "min(0.5, sup x . val2(x))",
        "add(mean a . val1(a), 1.5)",
    ]
    for s in texts:
        t = parse_term(s)
        again = parse_term(to_text(t))
        assert to_text(again) == to_text(t)


def test_parse_errors():
    with pytest.raises(TermSyntaxError):
        parse_term("mean u val1(u)")
    with pytest.raises(UnknownFunctionError):
        parse_term("frobnicate(val1(u))")
    with pytest.raises(ArityMismatchError):
        parse_term("and(val1(u))")
    with pytest.raises(UnboundAnchorError):
        parse_term("lmean v ~ w . val1(v)")
    # declared free anchors are fine
    parse_term("lmean v ~ w . val1(v)", free=("w",))


def test_free_vars_order():
    t = parse_term("and(E(a,b), sup z . E(z,c))")
    assert free_vars(t) == ("a", "b", "c")


def test_metrics_examples():
    m = metrics(Val(1, "u"))
    assert (m.rank, m.slope) == (0, 1.0)
    m = metrics(Mean("v", Val(1, "v")))
    assert (m.rank, m.mrank, m.srank, m.slope) == (1, 1, 0, 2.0)
    m = metrics(Sup("u", Mean("v", Edge("u", "v"))))
    assert (m.rank, m.srank, m.mrank, m.slope) == (2, 1, 1, 2.0)


def test_metrics_rank_inequalities():
    gen = np.random.default_rng(5)
    from conftest import random_term
    for _ in range(60):
        t = random_term(gen, depth=3)
        m = metrics(t)
        assert m.srank <= m.rank
        assert m.mrank <= m.rank
        assert m.lmrank <= m.mrank
        assert m.bound[0] <= m.bound[1]


def test_metrics_lmean_bound_includes_zero():
    reg = T.default_registry()
    reg.shift(2.0, "shift2")
    t = LMean("v", "u", T.Apply("shift2", (Val(1, "v"),)))
    lo, hi = metrics(t, reg).bound
    assert lo <= 0.0 <= hi


def test_registry_lipschitz_spot_check():
    gen = np.random.default_rng(17)
    reg = T.DEFAULT_REGISTRY
    for name in reg.names():
        entry = reg[name]
        box = [iv if iv[0] > -math.inf else (-5.0, 5.0) for iv in entry.input_box]
        lo = np.array([a for a, _ in box])
        hi = np.array([b for _, b in box])
        xs = lo + (hi - lo) * gen.random((10000, entry.arity))
        ys = lo + (hi - lo) * gen.random((10000, entry.arity))
        fx = np.array([entry(*row) for row in xs])
        fy = np.array([entry(*row) for row in ys])
        gap = np.abs(fx - fy)
        allowed = entry.slope_bound * np.max(np.abs(xs - ys), axis=1) + 1e-12
        assert np.all(gap <= allowed), name


@given(st.floats(-10, 10), st.floats(-10, 10))
@settings(max_examples=200)
def test_interval_ops_contain_values(x, y):
    # the interval extension of each opcode contains every pointwise value
    for name in T.DEFAULT_REGISTRY.names():
        entry = T.DEFAULT_REGISTRY[name]
        args = (x, y)[:entry.arity]
        boxes = [(a, a) for a in args]
        lo, hi = entry.interval(*boxes)
        assert lo <= entry(*args) <= hi


def test_compile_fo_examples():
    phi = T.FOExists("u", T.FOExists("v", T.FOEdge("u", "v")))
    t = compile_fo(phi)
    assert t == Sup("u", Sup("v", Edge("u", "v")))
    t = compile_fo(T.FONot(T.FOEq("u", "v")))
    assert t == T.Apply("not", (Eq("u", "v"),))


def test_compile_fo_matches_brute_force_small():
    from conftest import all_labeled_graphs, fo_holds
    from agglogic.evaluator import eval_term
    gen = np.random.default_rng(3)
    from conftest import random_sentence
    sentences = [random_sentence(gen) for _ in range(8)]
    sentences.append(T.TRIANGLE_SENTENCE)
    for n in (1, 2, 3, 4):
        for g in all_labeled_graphs(n):
            for phi in sentences:
                expected = 1.0 if fo_holds(phi, g) else 0.0
                assert eval_term(compile_fo(phi), g) == expected
