"""Term language Agg(Mean, LMean, Sup): AST, parser, metrics and FO compilation.

Terms are built from feature reads, edge/equality indicators and constants,
closed under a registry of Lipschitz functions and the three aggregators
``mean``, ``lmean`` (neighborhood mean anchored at a variable) and ``sup``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction


# ---------------------------------------------------------------------------
# errors

class TermError(Exception):
    pass


class TermSyntaxError(TermError):
    def __init__(self, message, pos):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class UnknownFunctionError(TermError):
    pass


class ArityMismatchError(TermError):
    pass


class UnboundAnchorError(TermError):
    pass


# ---------------------------------------------------------------------------
# function registry
#
# Kernel opcodes; parameterized entries carry up to two float parameters.

OP_NEG = 0
OP_NOT = 1
OP_ADD = 2
OP_SUB = 3
OP_MIN = 4
OP_MAX = 5
OP_ABS = 6
OP_PROD2 = 7
OP_SCALE = 8
OP_SHIFT = 9
OP_CLIP = 10

_OP_ARITY = {
    OP_NEG: 1, OP_NOT: 1, OP_ADD: 2, OP_SUB: 2, OP_MIN: 2, OP_MAX: 2,
    OP_ABS: 1, OP_PROD2: 2, OP_SCALE: 1, OP_SHIFT: 1, OP_CLIP: 1,
}


@dataclass(frozen=True)
class FunctionEntry:
    """A registered Lipschitz function with its slope bound on a box.

    ``slope_bound`` is a Lipschitz constant w.r.t. the sup-norm on
    ``input_box`` (one (lo, hi) interval per argument).
    """
    name: str
    arity: int
    opcode: int
    slope_bound: float
    input_box: tuple
    p0: float = 0.0
    p1: float = 0.0

    def __call__(self, *args):
        return apply_op(self.opcode, self.p0, self.p1, *args)

    def interval(self, *boxes):
        return op_interval(self.opcode, self.p0, self.p1, *boxes)


def apply_op(opcode, p0, p1, *args):
    if opcode == OP_NEG:
        return -args[0]
    if opcode == OP_NOT:
        return 1.0 - args[0]
    if opcode == OP_ADD:
        return args[0] + args[1]
    if opcode == OP_SUB:
        return args[0] - args[1]
    if opcode == OP_MIN:
        return min(args[0], args[1])
    if opcode == OP_MAX:
        return max(args[0], args[1])
    if opcode == OP_ABS:
        return abs(args[0])
    if opcode == OP_PROD2:
        return args[0] * args[1]
    if opcode == OP_SCALE:
        return p0 * args[0]
    if opcode == OP_SHIFT:
        return args[0] + p0
    if opcode == OP_CLIP:
        return min(max(args[0], p0), p1)
    raise AssertionError(f"unknown opcode {opcode}")


def op_interval(opcode, p0, p1, *boxes):
    """Interval extension of an opcode; sound hull of the image."""
    if opcode == OP_NEG:
        (lo, hi), = boxes
        return (-hi, -lo)
    if opcode == OP_NOT:
        (lo, hi), = boxes
        return (1.0 - hi, 1.0 - lo)
    if opcode == OP_ADD:
        (a, b), (c, d) = boxes
        return (a + c, b + d)
    if opcode == OP_SUB:
        (a, b), (c, d) = boxes
        return (a - d, b - c)
    if opcode == OP_MIN:
        (a, b), (c, d) = boxes
        return (min(a, c), min(b, d))
    if opcode == OP_MAX:
        (a, b), (c, d) = boxes
        return (max(a, c), max(b, d))
    if opcode == OP_ABS:
        (lo, hi), = boxes
        if lo >= 0:
            return (lo, hi)
        if hi <= 0:
            return (-hi, -lo)
        return (0.0, max(-lo, hi))
    if opcode == OP_PROD2:
        (a, b), (c, d) = boxes
        prods = (a * c, a * d, b * c, b * d)
        return (min(prods), max(prods))
    if opcode == OP_SCALE:
        (lo, hi), = boxes
        if p0 >= 0:
            return (p0 * lo, p0 * hi)
        return (p0 * hi, p0 * lo)
    if opcode == OP_SHIFT:
        (lo, hi), = boxes
        return (lo + p0, hi + p0)
    if opcode == OP_CLIP:
        (lo, hi), = boxes
        clip = lambda x: min(max(x, p0), p1)
        return (clip(lo), clip(hi))
    raise AssertionError(f"unknown opcode {opcode}")


class Registry:
    """Closed set of Lipschitz connectives usable in terms."""

    def __init__(self):
        self._entries = {}

    def add(self, entry: FunctionEntry):
        self._entries[entry.name] = entry
        return entry

    def __contains__(self, name):
        return name in self._entries

    def __getitem__(self, name) -> FunctionEntry:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownFunctionError(f"unknown function {name!r}") from None

    def names(self):
        return sorted(self._entries)

    def scale(self, c, name=None):
        name = name or f"scale{len(self._entries)}"
        return self.add(FunctionEntry(name, 1, OP_SCALE, abs(c),
                                      ((-math.inf, math.inf),), p0=float(c)))

    def shift(self, c, name=None):
        name = name or f"shift{len(self._entries)}"
        return self.add(FunctionEntry(name, 1, OP_SHIFT, 1.0,
                                      ((-math.inf, math.inf),), p0=float(c)))

    def clip(self, a, b, name=None):
        name = name or f"clip{len(self._entries)}"
        return self.add(FunctionEntry(name, 1, OP_CLIP, 1.0,
                                      ((-math.inf, math.inf),), p0=float(a), p1=float(b)))


def default_registry() -> Registry:
    """Boolean extensions plus basic arithmetic, all with valid slope bounds.

    ``prod2`` is only Lipschitz on a bounded box; its slope bound 2 is valid
    on [-1, 1] per argument.
    """
    reg = Registry()
    r = (-math.inf, math.inf)
    u = (0.0, 1.0)
    reg.add(FunctionEntry("not", 1, OP_NOT, 1.0, (u,)))
    reg.add(FunctionEntry("and", 2, OP_MIN, 1.0, (u, u)))
    reg.add(FunctionEntry("or", 2, OP_MAX, 1.0, (u, u)))
    reg.add(FunctionEntry("neg", 1, OP_NEG, 1.0, (r,)))
    reg.add(FunctionEntry("add", 2, OP_ADD, 2.0, (r, r)))
    reg.add(FunctionEntry("sub", 2, OP_SUB, 2.0, (r, r)))
    reg.add(FunctionEntry("min", 2, OP_MIN, 1.0, (r, r)))
    reg.add(FunctionEntry("max", 2, OP_MAX, 1.0, (r, r)))
    reg.add(FunctionEntry("abs", 1, OP_ABS, 1.0, (r,)))
    reg.add(FunctionEntry("prod2", 2, OP_PROD2, 2.0, ((-1.0, 1.0), (-1.0, 1.0))))
    reg.add(FunctionEntry("clip01", 1, OP_CLIP, 1.0, (r,), p0=0.0, p1=1.0))
    reg.add(FunctionEntry("half", 1, OP_SCALE, 0.5, (r,), p0=0.5))
    return reg


DEFAULT_REGISTRY = default_registry()


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Term:
    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Const(Term):
    value: float


@dataclass(frozen=True)
class Val(Term):
    index: int          # 1-based feature index
    var: str


@dataclass(frozen=True)
class Edge(Term):
    a: str
    b: str


@dataclass(frozen=True)
class Eq(Term):
    a: str
    b: str


@dataclass(frozen=True)
class Apply(Term):
    fn: str
    args: tuple


@dataclass(frozen=True)
class Mean(Term):
    var: str
    body: Term


@dataclass(frozen=True)
class LMean(Term):
    var: str
    anchor: str
    body: Term


@dataclass(frozen=True)
class Sup(Term):
    var: str
    body: Term


def free_vars(t: Term) -> tuple:
    """Free variables in first-occurrence order (the root binding order)."""
    out = []

    def walk(t, bound):
        if isinstance(t, Const):
            return
        if isinstance(t, Val):
            if t.var not in bound and t.var not in out:
                out.append(t.var)
        elif isinstance(t, (Edge, Eq)):
            for v in (t.a, t.b):
                if v not in bound and v not in out:
                    out.append(v)
        elif isinstance(t, Apply):
            for a in t.args:
                walk(a, bound)
        elif isinstance(t, Mean) or isinstance(t, Sup):
            walk(t.body, bound | {t.var})
        elif isinstance(t, LMean):
            if t.anchor not in bound and t.anchor not in out:
                out.append(t.anchor)
            walk(t.body, bound | {t.var})
        else:
            raise AssertionError(t)

    walk(t, set())
    return tuple(out)


def subterms(t: Term):
    """All subterms, preorder."""
    yield t
    if isinstance(t, Apply):
        for a in t.args:
            yield from subterms(a)
    elif isinstance(t, (Mean, LMean, Sup)):
        yield from subterms(t.body)


def contains_val(t: Term) -> bool:
    return any(isinstance(s, Val) for s in subterms(t))


def to_text(t: Term) -> str:
    if isinstance(t, Const):
        return repr(t.value)
    if isinstance(t, Val):
        return f"val{t.index}({t.var})"
    if isinstance(t, Edge):
        return f"E({t.a},{t.b})"
    if isinstance(t, Eq):
        return f"{t.a} = {t.b}"
    if isinstance(t, Apply):
        return f"{t.fn}({', '.join(to_text(a) for a in t.args)})"
    if isinstance(t, Mean):
        return f"mean {t.var} . {to_text(t.body)}"
    if isinstance(t, LMean):
        return f"lmean {t.var} ~ {t.anchor} . {to_text(t.body)}"
    if isinstance(t, Sup):
        return f"sup {t.var} . {to_text(t.body)}"
    raise AssertionError(t)


# ---------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<real>-?\d+(?:\.\d+)?)|(?P<word>[a-z][a-z0-9]*)|(?P<E>E)"
    r"|(?P<sym>[(),.~=]))"
)
_VAL_RE = re.compile(r"^val(\d+)$")
_KEYWORDS = {"mean", "lmean", "sup"}


class _Tokens:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.cur = None
        self.cur_pos = 0
        self.advance()

    def advance(self):
        prev = self.cur
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        self.cur_pos = self.pos
        if self.pos >= len(self.text):
            self.cur = ("eof", "")
            return prev
        m = _TOKEN_RE.match(self.text, self.pos)
        if not m or m.start() != self.pos:
            raise TermSyntaxError(f"unexpected character {self.text[self.pos]!r}", self.pos)
        self.pos = m.end()
        if m.group("real") is not None:
            self.cur = ("real", m.group("real"))
        elif m.group("word") is not None:
            self.cur = ("word", m.group("word"))
        elif m.group("E") is not None:
            self.cur = ("E", "E")
        else:
            self.cur = ("sym", m.group("sym"))
        return prev

    def expect(self, kind, value=None):
        k, v = self.cur
        if k != kind or (value is not None and v != value):
            want = value or kind
            raise TermSyntaxError(f"expected {want!r}, found {v or k!r}", self.cur_pos)
        self.advance()
        return v


class _Parser:
    def __init__(self, text, registry, free):
        self.toks = _Tokens(text)
        self.registry = registry
        self.declared_free = tuple(free)
        self.fresh = 0

    def parse(self):
        t = self.term({v: v for v in self.declared_free})
        if self.toks.cur[0] != "eof":
            raise TermSyntaxError(f"trailing input {self.toks.cur[1]!r}", self.toks.cur_pos)
        return t

    def rename(self, name, scope):
        # bound variables are kept distinct from everything already in scope
        if name not in scope and not any(v == name for v in scope.values()):
            return name
        while True:
            self.fresh += 1
            cand = f"{name}{self.fresh}"
            if cand not in scope and not any(v == cand for v in scope.values()):
                return cand

    def variable(self):
        pos = self.toks.cur_pos
        k, v = self.toks.cur
        if k != "word" or v in _KEYWORDS:
            raise TermSyntaxError(f"expected variable, found {v or k!r}", pos)
        self.toks.advance()
        return v

    def lookup(self, name, scope, pos):
        if name in scope:
            return scope[name]
        # free occurrence: usable as-is but must not collide with binders
        return name

    def term(self, scope):
        k, v = self.toks.cur
        pos = self.toks.cur_pos
        if k == "real":
            self.toks.advance()
            return Const(float(v))
        if k == "E":
            self.toks.advance()
            self.toks.expect("sym", "(")
            a = self.lookup(self.variable(), scope, pos)
            self.toks.expect("sym", ",")
            b = self.lookup(self.variable(), scope, pos)
            self.toks.expect("sym", ")")
            return Edge(a, b)
        if k != "word":
            raise TermSyntaxError(f"expected term, found {v or k!r}", pos)

        if v in ("mean", "sup"):
            self.toks.advance()
            raw = self.variable()
            bound = self.rename(raw, scope)
            self.toks.expect("sym", ".")
            body = self.term({**scope, raw: bound})
            return Mean(bound, body) if v == "mean" else Sup(bound, body)
        if v == "lmean":
            self.toks.advance()
            raw = self.variable()
            anchor_pos = self.toks.cur_pos
            self.toks.expect("sym", "~")
            anchor_raw = self.variable()
            if anchor_raw not in scope:
                raise UnboundAnchorError(
                    f"lmean anchor {anchor_raw!r} is neither bound nor declared free")
            bound = self.rename(raw, scope)
            self.toks.expect("sym", ".")
            body = self.term({**scope, raw: bound})
            return LMean(bound, scope[anchor_raw], body)

        m = _VAL_RE.match(v)
        if m:
            self.toks.advance()
            self.toks.expect("sym", "(")
            var = self.lookup(self.variable(), scope, pos)
            self.toks.expect("sym", ")")
            return Val(int(m.group(1)), var)

        self.toks.advance()
        if self.toks.cur == ("sym", "("):
            entry = self.registry[v]
            self.toks.advance()
            args = [self.term(scope)]
            while self.toks.cur == ("sym", ","):
                self.toks.advance()
                args.append(self.term(scope))
            self.toks.expect("sym", ")")
            if len(args) != entry.arity:
                raise ArityMismatchError(
                    f"{v} expects {entry.arity} arguments, got {len(args)}")
            return Apply(v, tuple(args))
        if self.toks.cur == ("sym", "="):
            self.toks.advance()
            b = self.lookup(self.variable(), scope, pos)
            return Eq(self.lookup(v, scope, pos), b)
        raise TermSyntaxError(f"expected '(' or '=' after {v!r}", self.toks.cur_pos)


def parse_term(text: str, registry: Registry = None, free=()) -> Term:
    """Parse concrete syntax into an alpha-renamed AST.

    ``free`` declares variables that may be used as lmean anchors without an
    enclosing binder; any other free occurrence (in val/E/=) needs no
    declaration.
    """
    return _Parser(text, registry or DEFAULT_REGISTRY, free).parse()


# ---------------------------------------------------------------------------
# metrics: ranks, slope and image bound

@dataclass(frozen=True)
class TermMetrics:
    rank: int
    srank: int
    mrank: int
    lmrank: int
    slope: float
    bound: tuple  # (lo, hi) interval containing all evaluations


def metrics(t: Term, registry: Registry = None, feature_box=None) -> TermMetrics:
    """Nesting ranks, the recursive slope and an interval image bound.

    ``feature_box`` gives one (lo, hi) interval per feature coordinate and
    defaults to [0,1] everywhere; the bound is only valid for graphs whose
    features lie inside it.
    """
    registry = registry or DEFAULT_REGISTRY

    def box_for(idx):
        if feature_box is None:
            return (0.0, 1.0)
        if idx - 1 >= len(feature_box):
            raise ArityMismatchError(f"feature index {idx} outside declared box")
        lo, hi = feature_box[idx - 1]
        return (float(lo), float(hi))

    def rec(t):
        if isinstance(t, Const):
            return TermMetrics(0, 0, 0, 0, 0.0, (t.value, t.value))
        if isinstance(t, Val):
            return TermMetrics(0, 0, 0, 0, 1.0, box_for(t.index))
        if isinstance(t, Edge):
            return TermMetrics(0, 0, 0, 0, 1.0, (0.0, 1.0))
        if isinstance(t, Eq):
            # the slope recursion lists only Val and Edge; Eq gets 1 by analogy
            return TermMetrics(0, 0, 0, 0, 1.0, (0.0, 1.0))
        if isinstance(t, Apply):
            entry = registry[t.fn]
            subs = [rec(a) for a in t.args]
            bound = entry.interval(*[s.bound for s in subs])
            return TermMetrics(
                max(s.rank for s in subs),
                max(s.srank for s in subs),
                max(s.mrank for s in subs),
                max(s.lmrank for s in subs),
                max(entry.slope_bound * s.slope for s in subs),
                bound,
            )
        sub = rec(t.body)
        if isinstance(t, Sup):
            return TermMetrics(sub.rank + 1, sub.srank + 1, sub.mrank,
                               sub.lmrank, sub.slope, sub.bound)
        if isinstance(t, Mean):
            return TermMetrics(sub.rank + 1, sub.srank, sub.mrank + 1,
                               sub.lmrank, sub.slope + 1.0, sub.bound)
        if isinstance(t, LMean):
            lo, hi = sub.bound
            # an isolated anchor yields 0, so the hull picks it up
            return TermMetrics(sub.rank + 1, sub.srank, sub.mrank + 1,
                               sub.lmrank + 1, sub.slope + 1.0,
                               (min(lo, 0.0), max(hi, 0.0)))
        raise AssertionError(t)

    return rec(t)


def image_bound_all_subterms(t: Term, registry=None, feature_box=None) -> float:
    """C with |value of every subterm| <= C; used for the game slack eta."""
    best = 0.0
    for s in subterms(t):
        lo, hi = metrics(s, registry, feature_box).bound
        best = max(best, abs(lo), abs(hi))
    return best


def core_radius(k: int) -> int:
    """Radius (3^k - 1)/2 attached to k nested root-appending operators."""
    return (3 ** k - 1) // 2


# ---------------------------------------------------------------------------
# first-order formulas and their characteristic terms

@dataclass(frozen=True)
class FOFormula:
    pass


@dataclass(frozen=True)
class FOEdge(FOFormula):
    a: str
    b: str


@dataclass(frozen=True)
class FOEq(FOFormula):
    a: str
    b: str


@dataclass(frozen=True)
class FONot(FOFormula):
    sub: FOFormula


@dataclass(frozen=True)
class FOAnd(FOFormula):
    a: FOFormula
    b: FOFormula


@dataclass(frozen=True)
class FOOr(FOFormula):
    a: FOFormula
    b: FOFormula


@dataclass(frozen=True)
class FOExists(FOFormula):
    var: str
    sub: FOFormula


@dataclass(frozen=True)
class FOForall(FOFormula):
    var: str
    sub: FOFormula


def compile_fo(phi: FOFormula) -> Term:
    """Characteristic term of a first-order graph formula.

    Existentials become sup, universals not-exists-not, connectives the
    slope-1 extensions min/max/1-x. The result is 1 on satisfying rooted
    graphs and 0 otherwise.
    """
    if isinstance(phi, FOEdge):
        return Edge(phi.a, phi.b)
    if isinstance(phi, FOEq):
        return Eq(phi.a, phi.b)
    if isinstance(phi, FONot):
        return Apply("not", (compile_fo(phi.sub),))
    if isinstance(phi, FOAnd):
        return Apply("and", (compile_fo(phi.a), compile_fo(phi.b)))
    if isinstance(phi, FOOr):
        return Apply("or", (compile_fo(phi.a), compile_fo(phi.b)))
    if isinstance(phi, FOExists):
        return Sup(phi.var, compile_fo(phi.sub))
    if isinstance(phi, FOForall):
        return Apply("not", (Sup(phi.var, Apply("not", (compile_fo(phi.sub),))),))
    raise AssertionError(phi)


def fo_free_vars(phi: FOFormula) -> tuple:
    out = []

    def walk(phi, bound):
        if isinstance(phi, (FOEdge, FOEq)):
            for v in (phi.a, phi.b):
                if v not in bound and v not in out:
                    out.append(v)
        elif isinstance(phi, FONot):
            walk(phi.sub, bound)
        elif isinstance(phi, (FOAnd, FOOr)):
            walk(phi.a, bound)
            walk(phi.b, bound)
        else:
            walk(phi.sub, bound | {phi.var})

    walk(phi, set())
    return tuple(out)


TRIANGLE_SENTENCE = FOExists("u", FOExists("v", FOExists("w", FOAnd(
    FOAnd(FOEdge("u", "v"), FOEdge("v", "w")), FOEdge("w", "u")))))

EDGE_SENTENCE = FOExists("u", FOExists("v", FOEdge("u", "v")))
