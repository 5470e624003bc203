"""Terms of the core calculus in nameless (de Bruijn) form.

Binder names are kept only as printing hints; they do not take part in
equality or hashing, so structural ``==`` on terms is alpha-equivalence.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional


# --- sorts -----------------------------------------------------------------


class Sort:
    """A universe: ``Prop``, ``Type_i`` (i >= 1) or ``U_i`` (i >= 0)."""


@dataclass(frozen=True)
class Prop(Sort):
    def __str__(self) -> str:
        return "Prop"


@dataclass(frozen=True)
class TypeLevel(Sort):
    level: int

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("Type levels start at 1")

    def __str__(self) -> str:
        return f"Type{self.level}"


@dataclass(frozen=True)
class DataLevel(Sort):
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("data levels start at 0")

    def __str__(self) -> str:
        return f"U{self.level}"


class BaseKind(enum.Enum):
    VAL = "Val"
    TIME = "Time"
    ID = "ID"


class TimeKind(enum.Enum):
    TIMESTAMP = "timestamp"
    DURATION = "duration"


class PredTag(enum.Enum):
    LE_VAL = "LeVal"
    LT_VAL = "LtVal"
    EQ_VAL = "EqVal"
    LE_TIME = "LeTime"
    LT_TIME = "LtTime"
    IN_SET = "InSet"
    EXCEEDS_PCT = "ExceedsPct"


# --- terms -----------------------------------------------------------------


class Term:
    """Base class of all term nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Var(Term):
    index: int


@dataclass(frozen=True, slots=True)
class Const(Term):
    name: str


@dataclass(frozen=True, slots=True)
class Lam(Term):
    dom: Optional[Term]
    body: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True, slots=True)
class Pair(Term):
    fst: Term
    snd: Term


@dataclass(frozen=True, slots=True)
class Split(Term):
    """``split scrut as <x, y> in body``; in ``body`` x is Var(1), y is Var(0)."""

    scrut: Term
    body: Term
    names: tuple = field(default=("x", "y"), compare=False)


@dataclass(frozen=True, slots=True)
class Inl(Term):
    value: Term
    other: Optional[Term] = None  # the right summand


@dataclass(frozen=True, slots=True)
class Inr(Term):
    value: Term
    other: Optional[Term] = None  # the left summand


@dataclass(frozen=True, slots=True)
class Case(Term):
    scrut: Term
    left: Term
    right: Term
    names: tuple = field(default=("x", "y"), compare=False)


@dataclass(frozen=True, slots=True)
class Refl(Term):
    pass


@dataclass(frozen=True, slots=True)
class J(Term):
    """Transport along an identity proof: ``J(C, d, e)`` with ``e : Id_A(a, b)``."""

    motive: Term
    base: Term
    eq: Term


@dataclass(frozen=True, slots=True)
class Absurd(Term):
    proof: Term
    target: Optional[Term] = None


@dataclass(frozen=True, slots=True)
class Pi(Term):
    dom: Term
    cod: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class Sigma(Term):
    fst: Term
    snd: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class Sum(Term):
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class IdType(Term):
    carrier: Term
    lhs: Term
    rhs: Term


@dataclass(frozen=True, slots=True)
class SortTerm(Term):
    sort: Sort


@dataclass(frozen=True, slots=True)
class BaseType(Term):
    kind: BaseKind


@dataclass(frozen=True, slots=True)
class ValLit(Term):
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("Val literals are natural numbers")


@dataclass(frozen=True, slots=True)
class TimeLit(Term):
    value: int  # milliseconds
    kind: TimeKind = TimeKind.TIMESTAMP


@dataclass(frozen=True, slots=True)
class IdLit(Term):
    value: str


@dataclass(frozen=True, slots=True)
class Let(Term):
    value: Term
    type: Term
    body: Term
    name: str = field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class PrimPred(Term):
    tag: PredTag
    args: tuple


@dataclass(frozen=True, slots=True)
class PrimProof(Term):
    tag: PredTag
    args: tuple


@dataclass(frozen=True, slots=True)
class PrimRefute(Term):
    """Witness of ``PrimPred(tag, args) -> Empty`` for a false closed predicate."""

    tag: PredTag
    args: tuple


@dataclass(frozen=True, slots=True)
class Distinct(Term):
    """Witness of ``Id_A(a, b) -> Empty`` for distinct literals a, b."""

    carrier: Term
    lhs: Term
    rhs: Term


@dataclass(frozen=True, slots=True)
class Empty(Term):
    pass


VAL = BaseType(BaseKind.VAL)
TIME = BaseType(BaseKind.TIME)
ID = BaseType(BaseKind.ID)
PROP = SortTerm(Prop())


def proj1(t: Term) -> Term:
    return Split(t, Var(1))


def proj2(t: Term) -> Term:
    return Split(t, Var(0))


def arrow(a: Term, b: Term) -> Term:
    """Non-dependent function type; ``b`` is given in the outer scope."""
    return Pi(a, shift(b, 1), "_")


def product(a: Term, b: Term) -> Term:
    """Non-dependent pair type; ``b`` is given in the outer scope."""
    return Sigma(a, shift(b, 1), "_")


def apply(fn: Term, *args: Term) -> Term:
    for a in args:
        fn = App(fn, a)
    return fn


# Term-valued fields per node class: (field, binders added, kind)
_LAYOUT: dict[type, tuple] = {
    Lam: (("dom", 0, "opt"), ("body", 1, "term")),
    App: (("fn", 0, "term"), ("arg", 0, "term")),
    Pair: (("fst", 0, "term"), ("snd", 0, "term")),
    Split: (("scrut", 0, "term"), ("body", 2, "term")),
    Inl: (("value", 0, "term"), ("other", 0, "opt")),
    Inr: (("value", 0, "term"), ("other", 0, "opt")),
    Case: (("scrut", 0, "term"), ("left", 1, "term"), ("right", 1, "term")),
    J: (("motive", 0, "term"), ("base", 0, "term"), ("eq", 0, "term")),
    Absurd: (("proof", 0, "term"), ("target", 0, "opt")),
    Pi: (("dom", 0, "term"), ("cod", 1, "term")),
    Sigma: (("fst", 0, "term"), ("snd", 1, "term")),
    Sum: (("left", 0, "term"), ("right", 0, "term")),
    IdType: (("carrier", 0, "term"), ("lhs", 0, "term"), ("rhs", 0, "term")),
    Let: (("value", 0, "term"), ("type", 0, "term"), ("body", 1, "term")),
    PrimPred: (("args", 0, "tuple"),),
    PrimProof: (("args", 0, "tuple"),),
    PrimRefute: (("args", 0, "tuple"),),
    Distinct: (("carrier", 0, "term"), ("lhs", 0, "term"), ("rhs", 0, "term")),
}


def children(t: Term) -> Iterator[tuple[Term, int]]:
    """Yield ``(child, binders)`` in left-to-right order."""
    for name, nb, kind in _LAYOUT.get(type(t), ()):
        v = getattr(t, name)
        if kind == "tuple":
            for x in v:
                yield x, nb
        elif v is not None:
            yield v, nb


def map_children(t: Term, f: Callable[[Term, int], Term]) -> Term:
    """Rebuild ``t`` with ``f(child, binders)`` applied to every child."""
    spec = _LAYOUT.get(type(t))
    if spec is None:
        return t
    changes = {}
    for name, nb, kind in spec:
        v = getattr(t, name)
        if kind == "tuple":
            nv = tuple(f(x, nb) for x in v)
            if any(a is not b for a, b in zip(nv, v)):
                changes[name] = nv
        elif v is not None:
            nv = f(v, nb)
            if nv is not v:
                changes[name] = nv
    return dataclasses.replace(t, **changes) if changes else t


def size(t: Term) -> int:
    """Number of nodes, annotations included; primitive witnesses count as one."""
    if isinstance(t, (PrimProof, PrimRefute, Distinct)):
        return 1
    return 1 + sum(size(c) for c, _ in children(t))


# --- de Bruijn operations --------------------------------------------------


def shift(t: Term, d: int, cutoff: int = 0) -> Term:
    """Add ``d`` to every free variable index >= ``cutoff``."""
    if d == 0:
        return t
    if isinstance(t, Var):
        if t.index >= cutoff:
            if t.index + d < 0:
                raise ValueError("negative shift would capture a binder")
            return Var(t.index + d)
        return t
    return map_children(t, lambda c, nb: shift(c, d, cutoff + nb))


def substitute(t: Term, u: Term, depth: int = 0) -> Term:
    """Replace ``Var(depth)`` by ``u`` and close the gap it leaves.

    ``u`` is expressed in the scope outside the removed binder.
    """
    if isinstance(t, Var):
        if t.index == depth:
            return shift(u, depth)
        if t.index > depth:
            return Var(t.index - 1)
        return t
    return map_children(t, lambda c, nb: substitute(c, u, depth + nb))


def instantiate(body: Term, u: Term) -> Term:
    """Body of a one-variable binder with that variable replaced by ``u``."""
    return substitute(body, u, 0)


def instantiate2(body: Term, first: Term, second: Term) -> Term:
    """Body of a two-variable binder (``split``) with x := first, y := second."""
    return substitute(substitute(body, shift(second, 1), 0), first, 0)


def free_vars(t: Term, depth: int = 0) -> frozenset:
    """Free de Bruijn indices of ``t`` relative to its outer scope."""
    if isinstance(t, Var):
        return frozenset((t.index - depth,)) if t.index >= depth else frozenset()
    out: frozenset = frozenset()
    for c, nb in children(t):
        out |= free_vars(c, depth + nb)
    return out


def mentions(t: Term, index: int) -> bool:
    if isinstance(t, Var):
        return t.index == index
    return any(mentions(c, index + nb) for c, nb in children(t))


def consts(t: Term) -> set:
    if isinstance(t, Const):
        return {t.name}
    out: set = set()
    for c, _ in children(t):
        out |= consts(c)
    return out


def alpha_equal(a: Term, b: Term) -> bool:
    return a == b


# --- canonical encoding ----------------------------------------------------


def _sort_data(s: Sort) -> list:
    if isinstance(s, Prop):
        return ["Prop"]
    if isinstance(s, TypeLevel):
        return ["Type", s.level]
    return ["U", s.level]


def _sort_from(d: list) -> Sort:
    if d[0] == "Prop":
        return Prop()
    return TypeLevel(d[1]) if d[0] == "Type" else DataLevel(d[1])


def to_data(t: Optional[Term], names: bool = True):
    """JSON-compatible nested lists; with ``names=False`` the encoding is canonical."""
    if t is None:
        return None
    r = lambda x: to_data(x, names)  # noqa: E731
    match t:
        case Var(i):
            return ["var", i]
        case Const(n):
            return ["const", n]
        case Lam(dom, body, name):
            return ["lam", r(dom), r(body)] + ([name] if names else [])
        case App(f, a):
            return ["app", r(f), r(a)]
        case Pair(a, b):
            return ["pair", r(a), r(b)]
        case Split(s, body, ns):
            return ["split", r(s), r(body)] + ([list(ns)] if names else [])
        case Inl(v, o):
            return ["inl", r(v), r(o)]
        case Inr(v, o):
            return ["inr", r(v), r(o)]
        case Case(s, left, right, ns):
            return ["case", r(s), r(left), r(right)] + ([list(ns)] if names else [])
        case Refl():
            return ["refl"]
        case J(c, d, e):
            return ["J", r(c), r(d), r(e)]
        case Absurd(p, ty):
            return ["absurd", r(p), r(ty)]
        case Pi(a, b, name):
            return ["pi", r(a), r(b)] + ([name] if names else [])
        case Sigma(a, b, name):
            return ["sigma", r(a), r(b)] + ([name] if names else [])
        case Sum(a, b):
            return ["sum", r(a), r(b)]
        case IdType(a, x, y):
            return ["id", r(a), r(x), r(y)]
        case SortTerm(s):
            return ["sort"] + _sort_data(s)
        case BaseType(k):
            return ["base", k.value]
        case ValLit(n):
            return ["val", n]
        case TimeLit(n, k):
            return ["time", n, k.value]
        case IdLit(s):
            return ["idlit", s]
        case Let(v, ty, body, name):
            return ["let", r(v), r(ty), r(body)] + ([name] if names else [])
        case PrimPred(tag, args):
            return ["pred", tag.value, [r(x) for x in args]]
        case PrimProof(tag, args):
            return ["prim", tag.value, [r(x) for x in args]]
        case PrimRefute(tag, args):
            return ["refute", tag.value, [r(x) for x in args]]
        case Distinct(a, x, y):
            return ["distinct", r(a), r(x), r(y)]
        case Empty():
            return ["empty"]
    raise TypeError(f"not a term: {t!r}")


def from_data(d) -> Optional[Term]:
    if d is None:
        return None
    f = from_data
    tag = d[0]
    if tag == "var":
        return Var(d[1])
    if tag == "const":
        return Const(d[1])
    if tag == "lam":
        return Lam(f(d[1]), f(d[2]), *d[3:4])
    if tag == "app":
        return App(f(d[1]), f(d[2]))
    if tag == "pair":
        return Pair(f(d[1]), f(d[2]))
    if tag == "split":
        return Split(f(d[1]), f(d[2]), *(tuple(n) for n in d[3:4]))
    if tag == "inl":
        return Inl(f(d[1]), f(d[2]))
    if tag == "inr":
        return Inr(f(d[1]), f(d[2]))
    if tag == "case":
        return Case(f(d[1]), f(d[2]), f(d[3]), *(tuple(n) for n in d[4:5]))
    if tag == "refl":
        return Refl()
    if tag == "J":
        return J(f(d[1]), f(d[2]), f(d[3]))
    if tag == "absurd":
        return Absurd(f(d[1]), f(d[2]))
    if tag == "pi":
        return Pi(f(d[1]), f(d[2]), *d[3:4])
    if tag == "sigma":
        return Sigma(f(d[1]), f(d[2]), *d[3:4])
    if tag == "sum":
        return Sum(f(d[1]), f(d[2]))
    if tag == "id":
        return IdType(f(d[1]), f(d[2]), f(d[3]))
    if tag == "sort":
        return SortTerm(_sort_from(d[1:]))
    if tag == "base":
        return BaseType(BaseKind(d[1]))
    if tag == "val":
        return ValLit(d[1])
    if tag == "time":
        return TimeLit(d[1], TimeKind(d[2]))
    if tag == "idlit":
        return IdLit(d[1])
    if tag == "let":
        return Let(f(d[1]), f(d[2]), f(d[3]), *d[4:5])
    if tag in ("pred", "prim", "refute"):
        cls = {"pred": PrimPred, "prim": PrimProof, "refute": PrimRefute}[tag]
        return cls(PredTag(d[1]), tuple(f(x) for x in d[2]))
    if tag == "distinct":
        return Distinct(f(d[1]), f(d[2]), f(d[3]))
    if tag == "empty":
        return Empty()
    raise ValueError(f"unknown term tag {tag!r}")


def canonical_bytes(t: Term) -> bytes:
    return json.dumps(to_data(t, names=False), separators=(",", ":")).encode()


def term_hash(t: Term) -> str:
    """SHA-256 of the canonical encoding; equal for alpha-equivalent terms."""
    return hashlib.sha256(canonical_bytes(t)).hexdigest()


# --- contexts --------------------------------------------------------------


@dataclass(frozen=True)
class Decl:
    name: str
    type: Term


@dataclass(frozen=True)
class Def:
    name: str
    value: Term
    type: Term


class Context:
    """Ordered declarations and definitions.

    ``Var(i)`` refers to the i-th entry from the end; ``Const(name)`` refers
    to a named (global) entry. Each entry's terms live in the scope of the
    entries before it.
    """

    __slots__ = ("entries", "_names")

    def __init__(self, entries=(), _names=None):
        self.entries = tuple(entries)
        if _names is None:
            _names = {}
            for pos, e in enumerate(self.entries):
                if e.name in _names:
                    raise ValueError(f"duplicate global name {e.name!r}")
                _names[e.name] = pos
        self._names = _names

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def extend(self, entry) -> "Context":
        """Push a local binder entry (not reachable by name)."""
        return Context(self.entries + (entry,), self._names)

    def define(self, entry) -> "Context":
        """Add a global entry reachable as ``Const(entry.name)``."""
        if entry.name in self._names:
            raise ValueError(f"duplicate global name {entry.name!r}")
        names = dict(self._names)
        names[entry.name] = len(self.entries)
        return Context(self.entries + (entry,), names)

    def has_name(self, name: str) -> bool:
        return name in self._names

    def names(self) -> list[str]:
        return list(self._names)

    def opaque(self, names) -> "Context":
        """Same context with the named definitions turned into declarations (no delta)."""
        names = set(names)
        entries = tuple(
            Decl(e.name, e.type) if isinstance(e, Def) and e.name in names and self._names.get(e.name) == pos else e
            for pos, e in enumerate(self.entries)
        )
        return Context(entries, self._names)

    def var_entry(self, index: int):
        """Entry for ``Var(index)`` with its terms shifted into the current scope."""
        if index < 0 or index >= len(self.entries):
            return None
        return self._shifted(len(self.entries) - 1 - index)

    def const_entry(self, name: str):
        pos = self._names.get(name)
        return None if pos is None else self._shifted(pos)

    def _shifted(self, pos: int):
        e = self.entries[pos]
        d = len(self.entries) - pos
        if isinstance(e, Def):
            return Def(e.name, shift(e.value, d), shift(e.type, d))
        return Decl(e.name, shift(e.type, d))

    def well_scoped(self, t: Term) -> bool:
        return all(i < len(self) for i in free_vars(t)) and all(
            self.has_name(n) for n in consts(t)
        )
