"""Bidirectional type checking.

Introduction forms (lambda, pair, refl, injections) are checked against an
expected type; elimination forms and variables infer. Every judgment and
every reduction step costs one unit of fuel; running out raises
FuelExhausted, which callers report as Unknown.
"""
from __future__ import annotations

import enum
from typing import Optional

from .reducer import Rule, _conv, contract, normal_form, whnf
from .resources import Found, Fuel, FuelExhausted, Refuted, Unknown, as_fuel
from .terms import (
    Absurd,
    App,
    BaseType,
    Case,
    Const,
    Context,
    DataLevel,
    Decl,
    Def,
    Distinct,
    Empty,
    IdLit,
    IdType,
    Inl,
    Inr,
    J,
    Lam,
    Let,
    Pair,
    Pi,
    PredTag,
    PrimPred,
    PrimProof,
    PrimRefute,
    Prop,
    Refl,
    Sigma,
    Sort,
    SortTerm,
    Split,
    Sum,
    Term,
    TimeLit,
    TypeLevel,
    ValLit,
    Var,
    VAL,
    TIME,
    ID,
    free_vars,
    instantiate,
    instantiate2,
    mentions,
    proj1,
    proj2,
    shift,
)


class ErrorKind(enum.Enum):
    UNBOUND_VARIABLE = "UnboundVariable"
    NOT_A_FUNCTION = "NotAFunction"
    DOMAIN_MISMATCH = "DomainMismatch"
    NOT_A_PAIR = "NotAPair"
    NOT_A_SUM = "NotASum"
    UNIVERSE_VIOLATION = "UniverseViolation"
    ID_ENDPOINTS_UNEQUAL = "IdEndpointsUnequal"
    MISMATCH = "Mismatch"
    CANNOT_INFER = "CannotInfer"
    NOT_A_TYPE = "NotAType"
    NOT_AN_ID = "NotAnId"
    PRIM_FALSE = "PrimitiveFalse"
    PRIM_UNDECIDED = "PrimitiveUndecided"


class TypeCheckError(Exception):
    def __init__(self, kind: ErrorKind, message: str = "", term=None, expected=None, actual=None, name=None):
        super().__init__(f"{kind.value}: {message}" if message else kind.value)
        self.kind = kind
        self.term = term
        self.expected = expected
        self.actual = actual
        self.name = name


# --- sorts ------------------------------------------------------------------


def sort_le(a: Sort, b: Sort) -> bool:
    """The sort coercions: reflexivity, Prop into U1, U_i into Type_{i+1}."""
    if a == b:
        return True
    if isinstance(a, Prop):
        return b == DataLevel(1) or b == TypeLevel(2)
    if isinstance(a, DataLevel):
        return b == TypeLevel(a.level + 1)
    return False


def sort_of_sort(s: Sort) -> Sort:
    if isinstance(s, Prop):
        return TypeLevel(1)
    if isinstance(s, TypeLevel):
        return TypeLevel(s.level + 1)
    return DataLevel(s.level + 1)


def _type_axis(s: Sort) -> int:
    if isinstance(s, Prop):
        return 2
    if isinstance(s, DataLevel):
        return s.level + 1
    return s.level


def _data_axis(s: Sort, what: str) -> int:
    if isinstance(s, Prop):
        return 1
    if isinstance(s, DataLevel):
        return s.level
    raise TypeCheckError(ErrorKind.UNIVERSE_VIOLATION, f"{what} component lives in {s}, not in a data universe")


def pi_sort(dom: Sort, cod: Sort) -> Sort:
    if isinstance(cod, Prop):
        return Prop()
    return TypeLevel(max(_type_axis(dom), _type_axis(cod)))


def sigma_sort(fst: Sort, snd: Sort) -> Sort:
    if isinstance(fst, Prop) and isinstance(snd, Prop):
        return Prop()
    return DataLevel(max(_data_axis(fst, "Sigma"), _data_axis(snd, "Sigma")))


def sum_sort(left: Sort, right: Sort) -> Sort:
    return DataLevel(max(_data_axis(left, "Sum"), _data_axis(right, "Sum")))


# --- primitive predicates -----------------------------------------------------


def _pred_arg_types(tag: PredTag, n: int) -> Optional[list]:
    if tag in (PredTag.LE_VAL, PredTag.LT_VAL, PredTag.EQ_VAL):
        return [VAL, VAL] if n == 2 else None
    if tag in (PredTag.LE_TIME, PredTag.LT_TIME):
        return [TIME, TIME] if n == 2 else None
    if tag == PredTag.EXCEEDS_PCT:
        return [VAL, VAL, VAL] if n == 3 else None
    return None


def _check_pred_args(ctx: Context, tag: PredTag, args: tuple, fuel: Fuel) -> None:
    if tag == PredTag.IN_SET:
        if not args:
            raise TypeCheckError(ErrorKind.MISMATCH, "InSet needs an element")
        elem = whnf(infer(ctx, args[0], fuel), ctx, fuel)
        if not isinstance(elem, BaseType):
            raise TypeCheckError(ErrorKind.MISMATCH, "InSet ranges over a base type", term=args[0], actual=elem)
        for a in args[1:]:
            check(ctx, a, elem, fuel)
        return
    types = _pred_arg_types(tag, len(args))
    if types is None:
        raise TypeCheckError(ErrorKind.MISMATCH, f"{tag.value} applied to {len(args)} arguments")
    for a, ty in zip(args, types):
        check(ctx, a, ty, fuel)


def _literal(t: Term):
    if isinstance(t, ValLit):
        return ("val", t.value)
    if isinstance(t, TimeLit):
        return ("time", t.kind, t.value)
    if isinstance(t, IdLit):
        return ("id", t.value)
    return None


def decide_prim(ctx: Context, tag: PredTag, args: tuple, fuel=None) -> Optional[bool]:
    """Evaluate a primitive predicate on literal arguments; None if not literal."""
    fuel = as_fuel(fuel)
    vals = [normal_form(a, ctx, fuel) for a in args]
    if tag == PredTag.IN_SET:
        lits = [_literal(v) for v in vals]
        if not lits or any(x is None for x in lits):
            return None
        return lits[0] in lits[1:]
    if tag in (PredTag.LE_TIME, PredTag.LT_TIME):
        if not all(isinstance(v, TimeLit) for v in vals) or vals[0].kind != vals[1].kind:
            return None
        x, y = vals[0].value, vals[1].value
        return x <= y if tag == PredTag.LE_TIME else x < y
    if not all(isinstance(v, ValLit) for v in vals):
        return None
    n = [v.value for v in vals]
    if tag == PredTag.LE_VAL:
        return n[0] <= n[1]
    if tag == PredTag.LT_VAL:
        return n[0] < n[1]
    if tag == PredTag.EQ_VAL:
        return n[0] == n[1]
    if tag == PredTag.EXCEEDS_PCT:
        return n[0] * 100 > n[1] * n[2]
    return None


def literals_distinct(ctx: Context, a: Term, b: Term, fuel=None) -> Optional[bool]:
    fuel = as_fuel(fuel)
    x, y = _literal(normal_form(a, ctx, fuel)), _literal(normal_form(b, ctx, fuel))
    if x is None or y is None:
        return None
    return x != y


# --- judgments ----------------------------------------------------------------


def sort_of(ctx: Context, ty: Term, fuel=None) -> Sort:
    """The sort a type lives in; raises NotAType if ``ty`` is not a type."""
    fuel = as_fuel(fuel)
    s = whnf(infer(ctx, ty, fuel), ctx, fuel)
    if not isinstance(s, SortTerm):
        raise TypeCheckError(ErrorKind.NOT_A_TYPE, "expected a type", term=ty, actual=s)
    return s.sort


def formation_sort(ctx: Context, ty: Term, fuel=None) -> Sort:
    return sort_of(ctx, ty, fuel)


def _equal(ctx: Context, a: Term, b: Term, fuel: Fuel) -> bool:
    return _conv(a, b, ctx, fuel, 0, proofs_irrelevant)


def _subsume(ctx: Context, actual: Term, expected: Term, t: Term, fuel: Fuel) -> None:
    if _equal(ctx, actual, expected, fuel):
        return
    a = whnf(actual, ctx, fuel)
    e = whnf(expected, ctx, fuel)
    if isinstance(a, SortTerm) and isinstance(e, SortTerm) and sort_le(a.sort, e.sort):
        return
    raise TypeCheckError(ErrorKind.MISMATCH, "type mismatch", term=t, expected=expected, actual=actual)


# Head redexes whose principal argument is an introduction form are typed
# through their contractum when the ordinary rule fails. Reduction strips
# annotations (a beta step turns ``case x of ...`` into ``case inr(v) of ...``
# with nothing to infer ``inr(v)`` from), so without this rule a well-typed
# term could step to one the checker rejects. Only the typing of the redex
# changes; the contractum is checked in full.
_HEAD_RULES = (Rule.BETA, Rule.IOTA_SPLIT, Rule.IOTA_CASE, Rule.IOTA_J)
_retrying: list = []


def _via_contractum(ctx: Context, t: Term, fuel: Fuel, first: TypeCheckError, judge):
    r = contract(t, ctx)
    if r is None or r[0] not in _HEAD_RULES or r[1] in _retrying:
        raise first
    if isinstance(t, App) and t.fn.dom is not None:
        try:
            check(ctx, t.arg, t.fn.dom, fuel)
        except TypeCheckError:
            raise first from None
    _retrying.append(r[1])
    try:
        return judge(r[1])
    except TypeCheckError:
        raise first from None
    finally:
        _retrying.pop()


def infer(ctx: Context, t: Term, fuel=None) -> Term:
    """Infer the type of ``t``."""
    fuel = as_fuel(fuel)
    try:
        return _infer(ctx, t, fuel)
    except TypeCheckError as e:
        return _via_contractum(ctx, t, fuel, e, lambda u: infer(ctx, u, fuel))


def check(ctx: Context, t: Term, expected: Term, fuel=None) -> None:
    """Check ``t`` against ``expected``; raises TypeCheckError on failure."""
    fuel = as_fuel(fuel)
    try:
        _check(ctx, t, expected, fuel)
    except TypeCheckError as e:
        _via_contractum(ctx, t, fuel, e, lambda u: check(ctx, u, expected, fuel))


def _infer(ctx: Context, t: Term, fuel: Fuel) -> Term:
    fuel.spend()
    match t:
        case Var(i):
            e = ctx.var_entry(i)
            if e is None:
                raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE, f"variable #{i}", term=t)
            return e.type
        case Const(name):
            e = ctx.const_entry(name)
            if e is None:
                raise TypeCheckError(ErrorKind.UNBOUND_VARIABLE, f"unknown name {name!r}", term=t, name=name)
            return e.type
        case SortTerm(s):
            return SortTerm(sort_of_sort(s))
        case BaseType():
            return SortTerm(DataLevel(0))
        case Empty():
            return SortTerm(Prop())
        case ValLit():
            return VAL
        case TimeLit():
            return TIME
        case IdLit():
            return ID
        case Pi(dom, cod, name):
            sa = sort_of(ctx, dom, fuel)
            sb = sort_of(ctx.extend(Decl(name, dom)), cod, fuel)
            return SortTerm(pi_sort(sa, sb))
        case Sigma(fst, snd, name):
            sa = sort_of(ctx, fst, fuel)
            sb = sort_of(ctx.extend(Decl(name, fst)), snd, fuel)
            return SortTerm(sigma_sort(sa, sb))
        case Sum(left, right):
            return SortTerm(sum_sort(sort_of(ctx, left, fuel), sort_of(ctx, right, fuel)))
        case IdType(carrier, lhs, rhs):
            s = sort_of(ctx, carrier, fuel)
            if isinstance(s, TypeLevel):
                raise TypeCheckError(ErrorKind.UNIVERSE_VIOLATION, "identity over a Type-level carrier", term=t)
            check(ctx, lhs, carrier, fuel)
            check(ctx, rhs, carrier, fuel)
            return SortTerm(Prop())
        case PrimPred(tag, args):
            _check_pred_args(ctx, tag, args, fuel)
            return SortTerm(Prop())
        case Lam(dom, body, name):
            if dom is None:
                raise TypeCheckError(ErrorKind.CANNOT_INFER, "unannotated lambda", term=t)
            sort_of(ctx, dom, fuel)
            return Pi(dom, infer(ctx.extend(Decl(name, dom)), body, fuel), name)
        case App(Lam(None, body, name), arg):
            # a redex with a bare binder: the argument supplies the domain
            a = infer(ctx, arg, fuel)
            return instantiate(infer(ctx.extend(Decl(name, a)), body, fuel), arg)
        case App(fn, arg):
            ft = whnf(infer(ctx, fn, fuel), ctx, fuel)
            if not isinstance(ft, Pi):
                raise TypeCheckError(ErrorKind.NOT_A_FUNCTION, "applying a non-function", term=fn, actual=ft)
            try:
                check(ctx, arg, ft.dom, fuel)
            except TypeCheckError as e:
                if e.kind == ErrorKind.MISMATCH and e.term is arg:
                    raise TypeCheckError(
                        ErrorKind.DOMAIN_MISMATCH, "argument does not fit the domain",
                        term=arg, expected=ft.dom, actual=e.actual,
                    ) from None
                raise
            return instantiate(ft.cod, arg)
        case Pair(fst, snd):
            a = infer(ctx, fst, fuel)
            b = infer(ctx, snd, fuel)
            ty = Sigma(a, shift(b, 1), "_")
            sort_of(ctx, ty, fuel)
            return ty
        case Split(scrut, body, names):
            st = whnf(infer(ctx, scrut, fuel), ctx, fuel)
            if not isinstance(st, Sigma):
                raise TypeCheckError(ErrorKind.NOT_A_PAIR, "splitting a non-pair", term=scrut, actual=st)
            inner = ctx.extend(Decl(names[0], st.fst)).extend(Decl(names[1], st.snd))
            c = infer(inner, body, fuel)
            return instantiate2(c, proj1(scrut), proj2(scrut))
        case Inl(value, other):
            if other is None:
                raise TypeCheckError(ErrorKind.CANNOT_INFER, "inl without the right summand", term=t)
            ty = Sum(infer(ctx, value, fuel), other)
            sort_of(ctx, ty, fuel)
            return ty
        case Inr(value, other):
            if other is None:
                raise TypeCheckError(ErrorKind.CANNOT_INFER, "inr without the left summand", term=t)
            ty = Sum(other, infer(ctx, value, fuel))
            sort_of(ctx, ty, fuel)
            return ty
        case Case(scrut, left, right, names):
            st = whnf(infer(ctx, scrut, fuel), ctx, fuel)
            if not isinstance(st, Sum):
                raise TypeCheckError(ErrorKind.NOT_A_SUM, "case on a non-sum", term=scrut, actual=st)
            c1 = infer(ctx.extend(Decl(names[0], st.left)), left, fuel)
            if mentions(c1, 0):
                raise TypeCheckError(ErrorKind.CANNOT_INFER, "branch type depends on the bound variable", term=t)
            c = shift(c1, -1)
            check(ctx.extend(Decl(names[1], st.right)), right, shift(c, 1), fuel)
            return c
        case Refl():
            raise TypeCheckError(ErrorKind.CANNOT_INFER, "refl needs an expected identity type", term=t)
        case J(motive, base, eq):
            et = whnf(infer(ctx, eq, fuel), ctx, fuel)
            if not isinstance(et, IdType):
                raise TypeCheckError(ErrorKind.NOT_AN_ID, "J on a non-identity proof", term=eq, actual=et)
            mt = whnf(infer(ctx, motive, fuel), ctx, fuel)
            if not isinstance(mt, Pi) or not _equal(ctx, mt.dom, et.carrier, fuel):
                raise TypeCheckError(ErrorKind.MISMATCH, "motive must be a family over the carrier", term=motive, actual=mt)
            if not isinstance(whnf(mt.cod, ctx.extend(Decl(mt.name, mt.dom)), fuel), SortTerm):
                raise TypeCheckError(ErrorKind.NOT_A_TYPE, "motive must return a type", term=motive)
            check(ctx, base, App(motive, et.lhs), fuel)
            return App(motive, et.rhs)
        case Absurd(proof, target):
            if target is None:
                raise TypeCheckError(ErrorKind.CANNOT_INFER, "absurd without a target type", term=t)
            check(ctx, proof, Empty(), fuel)
            sort_of(ctx, target, fuel)
            return target
        case Let(value, ty, body, name):
            sort_of(ctx, ty, fuel)
            check(ctx, value, ty, fuel)
            b = infer(ctx.extend(Def(name, value, ty)), body, fuel)
            return instantiate(b, value)
        case PrimProof(tag, args):
            _check_pred_args(ctx, tag, args, fuel)
            v = decide_prim(ctx, tag, args, fuel)
            if v is None:
                raise TypeCheckError(ErrorKind.PRIM_UNDECIDED, f"{tag.value} on non-literal arguments", term=t)
            if not v:
                raise TypeCheckError(ErrorKind.PRIM_FALSE, f"{tag.value} does not hold", term=t)
            return PrimPred(tag, args)
        case PrimRefute(tag, args):
            _check_pred_args(ctx, tag, args, fuel)
            v = decide_prim(ctx, tag, args, fuel)
            if v is None:
                raise TypeCheckError(ErrorKind.PRIM_UNDECIDED, f"{tag.value} on non-literal arguments", term=t)
            if v:
                raise TypeCheckError(ErrorKind.PRIM_FALSE, f"{tag.value} holds, cannot refute", term=t)
            return Pi(PrimPred(tag, args), Empty(), "_")
        case Distinct(carrier, lhs, rhs):
            idt = IdType(carrier, lhs, rhs)
            infer(ctx, idt, fuel)
            d = literals_distinct(ctx, lhs, rhs, fuel)
            if not d:
                kind = ErrorKind.PRIM_UNDECIDED if d is None else ErrorKind.PRIM_FALSE
                raise TypeCheckError(kind, "endpoints are not distinct literals", term=t)
            return Pi(idt, Empty(), "_")
    raise TypeCheckError(ErrorKind.CANNOT_INFER, f"unsupported term {type(t).__name__}", term=t)


def _check(ctx: Context, t: Term, expected: Term, fuel: Fuel) -> None:
    fuel.spend()
    match t:
        case Lam(dom, body, name):
            e = whnf(expected, ctx, fuel)
            if not isinstance(e, Pi):
                raise TypeCheckError(ErrorKind.MISMATCH, "lambda against a non-function type", term=t, expected=expected)
            if dom is not None:
                sort_of(ctx, dom, fuel)
                if not _equal(ctx, dom, e.dom, fuel):
                    raise TypeCheckError(ErrorKind.MISMATCH, "lambda annotation differs from the domain", term=t, expected=expected)
            check(ctx.extend(Decl(name, e.dom)), body, e.cod, fuel)
        case Pair(fst, snd):
            e = whnf(expected, ctx, fuel)
            if not isinstance(e, Sigma):
                raise TypeCheckError(ErrorKind.MISMATCH, "pair against a non-Sigma type", term=t, expected=expected)
            check(ctx, fst, e.fst, fuel)
            check(ctx, snd, instantiate(e.snd, fst), fuel)
        case Refl():
            e = whnf(expected, ctx, fuel)
            if not isinstance(e, IdType):
                raise TypeCheckError(ErrorKind.MISMATCH, "refl against a non-identity type", term=t, expected=expected)
            if not _equal(ctx, e.lhs, e.rhs, fuel):
                raise TypeCheckError(ErrorKind.ID_ENDPOINTS_UNEQUAL, "identity endpoints are not equal", term=t, expected=expected)
        case Inl(value, other) | Inr(value, other):
            e = whnf(expected, ctx, fuel)
            if not isinstance(e, Sum):
                raise TypeCheckError(ErrorKind.MISMATCH, "injection against a non-sum type", term=t, expected=expected)
            mine, theirs = (e.left, e.right) if isinstance(t, Inl) else (e.right, e.left)
            if other is not None and not _equal(ctx, other, theirs, fuel):
                raise TypeCheckError(ErrorKind.MISMATCH, "injection annotation differs", term=t, expected=expected)
            check(ctx, value, mine, fuel)
        case Absurd(proof, target):
            if target is not None:
                _subsume(ctx, target, expected, t, fuel)
            check(ctx, proof, Empty(), fuel)
        case Case(scrut, left, right, names):
            st = whnf(infer(ctx, scrut, fuel), ctx, fuel)
            if not isinstance(st, Sum):
                raise TypeCheckError(ErrorKind.NOT_A_SUM, "case on a non-sum", term=scrut, actual=st)
            check(ctx.extend(Decl(names[0], st.left)), left, shift(expected, 1), fuel)
            check(ctx.extend(Decl(names[1], st.right)), right, shift(expected, 1), fuel)
        case Split(scrut, body, names):
            st = whnf(infer(ctx, scrut, fuel), ctx, fuel)
            if not isinstance(st, Sigma):
                raise TypeCheckError(ErrorKind.NOT_A_PAIR, "splitting a non-pair", term=scrut, actual=st)
            inner = ctx.extend(Decl(names[0], st.fst)).extend(Decl(names[1], st.snd))
            try:
                check(inner, body, shift(expected, 2), fuel)
            except TypeCheckError as first:
                try:
                    c = infer(inner, body, fuel)
                    _subsume(ctx, instantiate2(c, proj1(scrut), proj2(scrut)), expected, t, fuel)
                except TypeCheckError:
                    raise first from None
        case Let(value, ty, body, name):
            sort_of(ctx, ty, fuel)
            check(ctx, value, ty, fuel)
            check(ctx.extend(Def(name, value, ty)), body, shift(expected, 1), fuel)
        case _:
            _subsume(ctx, infer(ctx, t, fuel), expected, t, fuel)


_irrelevance_active = [False]


def proofs_irrelevant(ctx: Context, depth: int, a: Term, b: Term, fuel: Fuel) -> bool:
    """True when ``a`` and ``b`` are proofs of the same proposition."""
    if _irrelevance_active[0]:
        return False
    if depth:
        if any(i < depth for i in free_vars(a) | free_vars(b)):
            return False
        a, b = shift(a, -depth), shift(b, -depth)
    _irrelevance_active[0] = True
    try:
        ty = infer(ctx, a, fuel)
        if not isinstance(sort_of(ctx, ty, fuel), Prop):
            return False
        check(ctx, b, ty, fuel)
        return True
    except TypeCheckError:
        return False
    finally:
        _irrelevance_active[0] = False


# --- decision procedure for primitive goals ------------------------------------


def synth_prim_proof(ctx: Context, tag: PredTag, args: tuple, fuel=None):
    """Found(PrimProof) / Refuted(PrimRefute) / Unknown for one predicate."""
    fuel = as_fuel(fuel)
    try:
        _check_pred_args(ctx, tag, tuple(args), fuel)
        v = decide_prim(ctx, tag, tuple(args), fuel)
    except FuelExhausted as exc:
        return Unknown(exc.reason)
    except TypeCheckError:
        return Unknown("undecided")
    if v is None:
        return Unknown("undecided")
    return Found(PrimProof(tag, tuple(args))) if v else Refuted(PrimRefute(tag, tuple(args)))


def synthesize(ctx: Context, goal: Term, fuel=None):
    """Decide conjunctions of primitive predicates and literal identities.

    Returns Found(proof), Refuted(counterproof : goal -> Empty) or Unknown.
    """
    fuel = as_fuel(fuel)
    try:
        return _synth(ctx, goal, fuel)
    except FuelExhausted as exc:
        return Unknown(exc.reason)
    except TypeCheckError:
        return Unknown("undecided")


def _synth(ctx: Context, goal: Term, fuel: Fuel):
    fuel.spend()
    g = whnf(goal, ctx, fuel)
    if isinstance(g, PrimPred):
        return synth_prim_proof(ctx, g.tag, g.args, fuel)
    if isinstance(g, IdType):
        if _equal(ctx, g.lhs, g.rhs, fuel):
            return Found(Refl())
        if literals_distinct(ctx, g.lhs, g.rhs, fuel):
            return Refuted(Distinct(g.carrier, g.lhs, g.rhs))
        return Unknown("undecided")
    if isinstance(g, Empty):
        return Refuted(Lam(Empty(), Var(0), "z"))
    if isinstance(g, Sigma):
        r1 = _synth(ctx, g.fst, fuel)
        if isinstance(r1, Refuted):
            return Refuted(Lam(goal, App(shift(r1.counterproof, 1), proj1(Var(0))), "z"))
        if not isinstance(r1, Found):
            return r1
        r2 = _synth(ctx, instantiate(g.snd, r1.proof), fuel)
        if isinstance(r2, Refuted):
            return Refuted(Lam(goal, App(shift(r2.counterproof, 1), proj2(Var(0))), "z"))
        if not isinstance(r2, Found):
            return r2
        return Found(Pair(r1.proof, r2.proof))
    return Unknown("undecided")


# --- conveniences ---------------------------------------------------------------


class Verdict(enum.Enum):
    OK = "Ok"
    ERROR = "TypeError"
    UNKNOWN = "Unknown"


def judge(ctx: Context, t: Term, expected: Optional[Term] = None, fuel=None):
    """Run check (or infer) and report (Verdict, payload) instead of raising.

    The payload is the inferred type, the TypeCheckError, or None.
    """
    fuel = as_fuel(fuel)
    try:
        if expected is None:
            return Verdict.OK, infer(ctx, t, fuel)
        check(ctx, t, expected, fuel)
        return Verdict.OK, expected
    except TypeCheckError as e:
        return Verdict.ERROR, e
    except FuelExhausted:
        return Verdict.UNKNOWN, None


def check_context(ctx: Context, fuel=None) -> None:
    """Check every entry of ``ctx`` in order."""
    fuel = as_fuel(fuel)
    prefix = Context()
    for e in ctx.entries:
        sort_of(prefix, e.type, fuel)
        if isinstance(e, Def):
            check(prefix, e.value, e.type, fuel)
        prefix = prefix.define(e) if ctx.has_name(e.name) and not prefix.has_name(e.name) else prefix.extend(e)
