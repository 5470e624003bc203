"""Small-step reduction, normal forms and definitional equality.

The strategy is leftmost-outermost: the first redex met in a pre-order walk
is contracted. Unfolding a definition (delta) or a let (zeta) counts as a
step and costs fuel, but is flagged auxiliary in traces.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional

from .resources import Fuel, FuelExhausted, as_fuel
from .terms import (
    Absurd,
    App,
    Case,
    Const,
    Context,
    Def,
    Inl,
    Inr,
    J,
    Lam,
    Let,
    Pair,
    Refl,
    Split,
    Term,
    Var,
    children,
    instantiate,
    instantiate2,
    map_children,
    shift,
    term_hash,
)


class Rule(enum.Enum):
    BETA = "Beta"
    IOTA_SPLIT = "IotaSplit"
    IOTA_CASE = "IotaCase"
    IOTA_J = "IotaJ"
    DELTA = "Delta"
    ZETA = "Zeta"

    @property
    def auxiliary(self) -> bool:
        return self in (Rule.DELTA, Rule.ZETA)


@dataclass(frozen=True)
class ReductionStep:
    rule: Rule
    path: tuple
    before: str
    after: str

    @property
    def auxiliary(self) -> bool:
        return self.rule.auxiliary

    def to_json(self) -> dict:
        return {
            "rule": self.rule.value,
            "path": list(self.path),
            "before": self.before,
            "after": self.after,
            "auxiliary": self.auxiliary,
        }


class Conv(enum.Enum):
    EQUAL = "Equal"
    NOT_EQUAL = "NotEqual"
    UNKNOWN = "Unknown"


class ReplayMismatch(Exception):
    """A recorded reduction step does not reproduce on the given term."""


_EMPTY_CTX = Context()


def _unfold(t: Term, ctx: Context, depth: int) -> Optional[Term]:
    """Definition body for a ``Const`` or free ``Var`` bound to a ``Def``."""
    if isinstance(t, Const):
        e = ctx.const_entry(t.name)
    elif isinstance(t, Var) and t.index >= depth:
        e = ctx.var_entry(t.index - depth)
    else:
        return None
    if isinstance(e, Def):
        return shift(e.value, depth)
    return None


def contract(t: Term, ctx: Context, depth: int = 0) -> Optional[tuple[Rule, Term]]:
    """Contract ``t`` if it is itself a redex."""
    match t:
        case App(Lam(_, body), arg):
            return Rule.BETA, instantiate(body, arg)
        case Split(Pair(u, v), body):
            return Rule.IOTA_SPLIT, instantiate2(body, u, v)
        case Case(Inl(v), left, _):
            return Rule.IOTA_CASE, instantiate(left, v)
        case Case(Inr(v), _, right):
            return Rule.IOTA_CASE, instantiate(right, v)
        case J(_, base, Refl()):
            return Rule.IOTA_J, base
        case Let(value, _, body):
            return Rule.ZETA, instantiate(body, value)
        case Const() | Var():
            body = _unfold(t, ctx, depth)
            if body is not None:
                return Rule.DELTA, body
    return None


def redexes(t: Term, ctx: Context = _EMPTY_CTX) -> list[tuple]:
    """Paths of every redex, in leftmost-outermost order."""
    out: list[tuple] = []

    def walk(u: Term, depth: int, path: tuple) -> None:
        if contract(u, ctx, depth) is not None:
            out.append(path)
        for i, (c, nb) in enumerate(children(u)):
            walk(c, depth + nb, path + (i,))

    walk(t, 0, ())
    return out


def _first_redex(t: Term, ctx: Context, depth: int, path: tuple) -> Optional[tuple]:
    if contract(t, ctx, depth) is not None:
        return path
    for i, (c, nb) in enumerate(children(t)):
        p = _first_redex(c, ctx, depth + nb, path + (i,))
        if p is not None:
            return p
    return None


def contract_at(t: Term, path: tuple, ctx: Context = _EMPTY_CTX) -> tuple[Rule, Term]:
    """Contract the redex at ``path``; raises ValueError if there is none."""
    rule_box: list = []

    def go(u: Term, depth: int, rest: tuple) -> Term:
        if not rest:
            r = contract(u, ctx, depth)
            if r is None:
                raise ValueError(f"no redex at path {path}")
            rule_box.append(r[0])
            return r[1]
        target = rest[0]
        counter = iter(range(10**9))

        def f(c: Term, nb: int) -> Term:
            return go(c, depth + nb, rest[1:]) if next(counter) == target else c

        out = map_children(u, f)
        if not rule_box:
            raise ValueError(f"no redex at path {path}")
        return out

    result = go(t, 0, tuple(path))
    return rule_box[0], result


def step_once(t: Term, ctx: Context = _EMPTY_CTX, fuel=None) -> Optional[tuple[Term, ReductionStep]]:
    """One leftmost-outermost step, or None if ``t`` is normal."""
    path = _first_redex(t, ctx, 0, ())
    if path is None:
        return None
    if fuel is not None:
        as_fuel(fuel).spend()
    rule, out = contract_at(t, path, ctx)
    return out, ReductionStep(rule, path, term_hash(t), term_hash(out))


def reduce(
    t: Term,
    ctx: Context = _EMPTY_CTX,
    fuel=None,
    strategy: str = "leftmost-outermost",
    rng: Optional[random.Random] = None,
) -> tuple[Term, list[ReductionStep]]:
    """Reduce to normal form, recording every step.

    ``strategy`` is ``"leftmost-outermost"`` or ``"random"`` (a seeded ``rng``
    picks among all redexes). Raises FuelExhausted carrying the partial trace.
    """
    fuel = as_fuel(fuel)
    trace: list[ReductionStep] = []
    while True:
        if strategy == "random":
            paths = redexes(t, ctx)
            if not paths:
                return t, trace
            path = (rng or random.Random(0)).choice(paths)
        else:
            path = _first_redex(t, ctx, 0, ())
            if path is None:
                return t, trace
        try:
            fuel.spend()
        except FuelExhausted as exc:
            raise FuelExhausted(str(exc), trace, exc.reason) from None
        rule, out = contract_at(t, path, ctx)
        trace.append(ReductionStep(rule, path, term_hash(t), term_hash(out)))
        t = out


def normalize(t: Term, ctx: Context = _EMPTY_CTX, fuel=None) -> tuple[Term, list[ReductionStep]]:
    return reduce(t, ctx, fuel)


def replay(t: Term, trace: list[ReductionStep], ctx: Context = _EMPTY_CTX) -> Term:
    """Re-apply a recorded trace, checking every digest."""
    for s in trace:
        if term_hash(t) != s.before:
            raise ReplayMismatch(f"digest before step {s.rule.value} at {s.path} differs")
        rule, t = contract_at(t, s.path, ctx)
        if rule != s.rule or term_hash(t) != s.after:
            raise ReplayMismatch(f"step {s.rule.value} at {s.path} does not reproduce")
    return t


# --- weak head and full normal forms without traces -------------------------


def whnf(t: Term, ctx: Context = _EMPTY_CTX, fuel=None, depth: int = 0) -> Term:
    """Weak head normal form. ``depth`` counts binders between ``t`` and ``ctx``."""
    fuel = as_fuel(fuel)
    while True:
        match t:
            case App(fn, arg):
                f = whnf(fn, ctx, fuel, depth)
                if isinstance(f, Lam):
                    fuel.spend()
                    t = instantiate(f.body, arg)
                    continue
                return t if f is fn else App(f, arg)
            case Split(scrut, body):
                s = whnf(scrut, ctx, fuel, depth)
                if isinstance(s, Pair):
                    fuel.spend()
                    t = instantiate2(body, s.fst, s.snd)
                    continue
                return t if s is scrut else Split(s, body, t.names)
            case Case(scrut, left, right):
                s = whnf(scrut, ctx, fuel, depth)
                if isinstance(s, Inl):
                    fuel.spend()
                    t = instantiate(left, s.value)
                    continue
                if isinstance(s, Inr):
                    fuel.spend()
                    t = instantiate(right, s.value)
                    continue
                return t if s is scrut else Case(s, left, right, t.names)
            case J(motive, base, eq):
                e = whnf(eq, ctx, fuel, depth)
                if isinstance(e, Refl):
                    fuel.spend()
                    t = base
                    continue
                return t if e is eq else J(motive, base, e)
            case Let(value, _, body):
                fuel.spend()
                t = instantiate(body, value)
                continue
            case Const() | Var():
                body = _unfold(t, ctx, depth)
                if body is None:
                    return t
                fuel.spend()
                t = body
                continue
        return t


def normal_form(t: Term, ctx: Context = _EMPTY_CTX, fuel=None, depth: int = 0) -> Term:
    """Full normal form (same result as ``reduce``, without a trace)."""
    fuel = as_fuel(fuel)
    w = whnf(t, ctx, fuel, depth)
    return map_children(w, lambda c, nb: normal_form(c, ctx, fuel, depth + nb))


# --- definitional equality --------------------------------------------------

_TYPE_FORMERS = ("Pi", "Sigma", "Sum", "IdType", "SortTerm", "BaseType", "Empty", "PrimPred")
_LITERALS = ("ValLit", "TimeLit", "IdLit")


def _may_be_proof(t: Term) -> bool:
    name = type(t).__name__
    return name not in _TYPE_FORMERS and name not in _LITERALS


def _static_fields_equal(a: Term, b: Term) -> bool:
    """Compare the non-term payload (literals, tags, sorts) of two nodes."""
    from .terms import _LAYOUT

    term_fields = {f for f, _, _ in _LAYOUT.get(type(a), ())}
    for f in a.__dataclass_fields__.values():
        if not f.compare or f.name in term_fields:
            continue
        if getattr(a, f.name) != getattr(b, f.name):
            return False
    return True


# Annotation fields ignored by conversion.
_IGNORED = {Lam: ("dom",), Inl: ("other",), Inr: ("other",), Absurd: ("target",)}


def _conv(a: Term, b: Term, ctx: Context, fuel: Fuel, depth: int, irrelevance) -> bool:
    fuel.spend()
    if a == b:
        return True
    a = whnf(a, ctx, fuel, depth)
    b = whnf(b, ctx, fuel, depth)
    if a == b:
        return True
    if isinstance(a, Lam) and not isinstance(b, Lam):
        return _conv(a.body, App(shift(b, 1), Var(0)), ctx, fuel, depth + 1, irrelevance)
    if isinstance(b, Lam) and not isinstance(a, Lam):
        return _conv(App(shift(a, 1), Var(0)), b.body, ctx, fuel, depth + 1, irrelevance)
    if type(a) is type(b) and _static_fields_equal(a, b):
        from .terms import _LAYOUT

        ok = True
        ignored = _IGNORED.get(type(a), ())
        for name, nb, kind in _LAYOUT.get(type(a), ()):
            if name in ignored:
                continue
            x, y = getattr(a, name), getattr(b, name)
            if kind == "tuple":
                if len(x) != len(y) or not all(
                    _conv(p, q, ctx, fuel, depth, irrelevance) for p, q in zip(x, y)
                ):
                    ok = False
                    break
            elif (x is None) != (y is None):
                ok = False
                break
            elif x is not None and not _conv(x, y, ctx, fuel, depth + nb, irrelevance):
                ok = False
                break
        if ok:
            return True
    if irrelevance is not None and _may_be_proof(a) and _may_be_proof(b):
        return irrelevance(ctx, depth, a, b, fuel)
    return False


def conv_equal(a: Term, b: Term, ctx: Context = _EMPTY_CTX, fuel=None, irrelevance="default", depth: int = 0) -> Conv:
    """Definitional equality up to beta/iota/delta/zeta, eta and proof irrelevance."""
    fuel = as_fuel(fuel)
    if irrelevance == "default":
        from .typechecker import proofs_irrelevant as irrelevance
    try:
        return Conv.EQUAL if _conv(a, b, ctx, fuel, depth, irrelevance) else Conv.NOT_EQUAL
    except FuelExhausted:
        return Conv.UNKNOWN
