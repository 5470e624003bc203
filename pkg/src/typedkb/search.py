"""Bounded proof search, root-cause construction, counterfactuals and watchers.

``search_proof`` enumerates proof terms by increasing size (the ``depth``
of a budget is the largest size tried). Candidates are generated type
directed, mirroring the bidirectional checker, and the winner is re-checked
by the checker before it is returned. Pruning only drops a candidate when a
strictly smaller proof of the same judgment is guaranteed to be generated:

* a proposition needs one proof per size, not all of them;
* a split or case whose bound variables go unused is dominated by its body;
* a scrutinee already split further out is not split again.
* pairs are only built against a Sigma goal; a pair synthesised on its own
  could only feed a split, and for proofs this small the split-free form wins.

Data (records, literals, opaque sorts) is never taken apart and is only
supplied by facts and bound variables: the search is closed-world over
the knowledge it is given.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .reducer import normal_form, whnf
from .resources import Budget, Fuel, FuelExhausted, Found, Refuted, Unknown
from .terms import (
    Absurd,
    App,
    Case,
    Const,
    Context,
    Decl,
    Def,
    Distinct,
    Empty,
    IdLit,
    IdType,
    Inl,
    Inr,
    Lam,
    Pair,
    Pi,
    PrimPred,
    PrimProof,
    PrimRefute,
    Prop,
    Refl,
    Sigma,
    Split,
    Sum,
    Term,
    TimeKind,
    TimeLit,
    Var,
    children,
    free_vars,
    instantiate,
    instantiate2,
    mentions,
    proj1,
    proj2,
    shift,
)
from .typechecker import (
    TypeCheckError,
    _equal,
    check,
    decide_prim,
    literals_distinct,
    sort_of,
    synthesize,
)


# --- the enumerator ---------------------------------------------------------------------


@dataclass(frozen=True)
class _Frame:
    ctx: Context
    locals_: tuple = ()  # local hypothesis types, each in the scope before it
    splits: frozenset = frozenset()  # scrutinees already eliminated, in this scope

    @property
    def key(self) -> tuple:
        return self.locals_, self.splits

    def push(self, *types: Term, scrut: Optional[Term] = None) -> "_Frame":
        ctx = self.ctx
        for i, ty in enumerate(types):
            ctx = ctx.extend(Decl(f"h{len(self.locals_) + i}", ty))
        k = len(types)
        splits = {shift(s, k) for s in self.splits}
        if scrut is not None:
            splits.add(shift(scrut, k))
        return _Frame(ctx, self.locals_ + types, frozenset(splits))


class _Engine:
    def __init__(self, ctx: Context, leaves: list, fuel: Fuel):
        self.fuel = fuel
        self.leaves = leaves  # closed (term, type) pairs usable anywhere
        self.chk_memo: dict = {}
        self.inf_memo: dict = {}
        self.class_memo: dict = {}
        self.root = _Frame(ctx)

    # classification of types
    def _sort(self, fr: _Frame, ty: Term):
        try:
            return sort_of(fr.ctx, ty, self.fuel)
        except TypeCheckError:
            return None

    def logical(self, fr: _Frame, ty: Term) -> bool:
        """Propositions, and Pi/Sigma/Sum built from propositions."""
        key = ("logical", fr.locals_, ty)
        if key in self.class_memo:
            return self.class_memo[key]
        self.class_memo[key] = False
        s = self._sort(fr, ty)
        if s is None:
            out = False
        elif isinstance(s, Prop):
            out = True
        else:
            w = whnf(ty, fr.ctx, self.fuel)
            if isinstance(w, Sum):
                out = self.logical(fr, w.left) and self.logical(fr, w.right)
            elif isinstance(w, Sigma):
                out = self.logical(fr, w.fst) and self.logical(fr.push(w.fst), w.snd)
            elif isinstance(w, Pi):
                out = self.logical(fr.push(w.dom), w.cod)
            else:
                out = False
        self.class_memo[key] = out
        return out

    def is_prop(self, fr: _Frame, ty: Term) -> bool:
        key = ("prop", fr.locals_, ty)
        if key not in self.class_memo:
            self.class_memo[key] = isinstance(self._sort(fr, ty), Prop)
        return self.class_memo[key]

    def assemblable(self, fr: _Frame, ty: Term) -> bool:
        """Types whose inhabitants search may build: logical ones, or Sigmas ending in one."""
        if self.logical(fr, ty):
            return True
        w = whnf(ty, fr.ctx, self.fuel)
        return isinstance(w, Sigma) and self.assemblable(fr.push(w.fst), w.snd)

    def _nf_key(self, fr: _Frame, t: Term):
        return normal_form(t, fr.ctx, self.fuel)

    # check mode: terms of exactly size n that check against goal
    def chk(self, fr: _Frame, goal: Term, n: int) -> list:
        key = (fr.key, goal, n)
        hit = self.chk_memo.get(key)
        if hit is not None:
            return hit
        self.chk_memo[key] = []
        self.fuel.spend()
        one = self.is_prop(fr, goal)
        out: list = []
        seen: set = set()
        for t in self._chk_candidates(fr, goal, n):
            if one:
                out.append(t)
                break
            k = self._nf_key(fr, t)
            if k not in seen:
                seen.add(k)
                out.append(t)
        self.chk_memo[key] = out
        return out

    def _chk_candidates(self, fr: _Frame, goal: Term, n: int):
        fuel = self.fuel
        g = whnf(goal, fr.ctx, fuel)
        logical = self.logical(fr, goal)
        if n == 1:
            yield from self._goal_leaves(fr, g)
        # a term that infers a convertible type
        if logical or n == 1:
            for t, ty in self.inf(fr, n):
                if _equal(fr.ctx, ty, goal, fuel):
                    yield t
        if n < 2:
            return
        if isinstance(g, Pi) and logical:
            for body in self.chk(fr.push(g.dom), g.cod, n - 1):
                yield Lam(None, body)
        if isinstance(g, Sigma) and self.assemblable(fr, goal):
            for i in range(1, n - 1):
                for a in self.chk(fr, g.fst, i):
                    for b in self.chk(fr, instantiate(g.snd, a), n - 1 - i):
                        yield Pair(a, b)
        if isinstance(g, Sum) and logical:
            for a in self.chk(fr, g.left, n - 1):
                yield Inl(a)
            for b in self.chk(fr, g.right, n - 1):
                yield Inr(b)
        if not logical:
            return
        # eliminations of logical hypotheses
        for i in range(1, n - 1):
            for s, st in self.inf(fr, i):
                if s in fr.splits:
                    continue
                w = whnf(st, fr.ctx, fuel)
                rest = n - 1 - i
                if isinstance(w, Sum) and self.logical(fr, w):
                    left_fr = fr.push(w.left, scrut=s)
                    right_fr = fr.push(w.right, scrut=s)
                    up = shift(goal, 1)
                    for j in range(1, rest):
                        for l in self.chk(left_fr, up, j):
                            if not mentions(l, 0):
                                continue
                            for r in self.chk(right_fr, up, rest - j):
                                if mentions(r, 0):
                                    yield Case(s, l, r, ("u", "v"))
                elif isinstance(w, Sigma) and self.logical(fr, w):
                    inner = fr.push(w.fst, w.snd, scrut=s)
                    for body in self.chk(inner, shift(goal, 2), rest):
                        if mentions(body, 0) or mentions(body, 1):
                            yield Split(s, body, ("u", "v"))
        if not isinstance(g, Empty):
            for e in self.chk(fr, Empty(), n - 1):
                yield Absurd(e)

    def _goal_leaves(self, fr: _Frame, g: Term):
        fuel = self.fuel
        if isinstance(g, PrimPred) and _decide(fr.ctx, g, fuel) is True:
            yield PrimProof(g.tag, g.args)
        elif isinstance(g, IdType):
            if _equal(fr.ctx, g.lhs, g.rhs, fuel):
                yield Refl()
        elif isinstance(g, Pi) and isinstance(whnf(g.cod, fr.ctx.extend(Decl("_", g.dom)), fuel), Empty):
            d = whnf(g.dom, fr.ctx, fuel)
            if isinstance(d, PrimPred) and _decide(fr.ctx, d, fuel) is False:
                yield PrimRefute(d.tag, d.args)
            elif isinstance(d, IdType) and literals_distinct(fr.ctx, d.lhs, d.rhs, fuel):
                yield Distinct(d.carrier, d.lhs, d.rhs)

    # infer mode: (term, type) pairs of exactly size n
    def inf(self, fr: _Frame, n: int) -> list:
        key = (fr.key, n)
        hit = self.inf_memo.get(key)
        if hit is not None:
            return hit
        self.inf_memo[key] = []
        self.fuel.spend()
        out: list = []
        seen: set = set()
        for t, ty in self._inf_candidates(fr, n):
            if self.is_prop(fr, ty):
                k = ("type", normal_form(ty, fr.ctx, self.fuel))
            else:
                k = ("term", self._nf_key(fr, t))
            if k not in seen:
                seen.add(k)
                out.append((t, ty))
        self.inf_memo[key] = out
        return out

    def _inf_candidates(self, fr: _Frame, n: int):
        fuel = self.fuel
        if n == 1:
            for i in range(len(fr.locals_)):
                yield Var(i), fr.ctx.var_entry(i).type
            yield from self.leaves
            return
        for i in range(1, n - 1):
            for f, ft in self.inf(fr, i):
                w = whnf(ft, fr.ctx, fuel)
                if not isinstance(w, Pi):
                    continue
                for a in self.chk(fr, w.dom, n - 1 - i):
                    yield App(f, a), instantiate(w.cod, a)
        for i in range(1, n - 1):
            rest = n - 1 - i
            for s, st in self.inf(fr, i):
                if s in fr.splits:
                    continue
                w = whnf(st, fr.ctx, fuel)
                if isinstance(w, Sigma) and self.logical(fr, w):
                    inner = fr.push(w.fst, w.snd, scrut=s)
                    for body, c in self.inf(inner, rest):
                        if mentions(body, 0) or mentions(body, 1):
                            yield Split(s, body, ("u", "v")), instantiate2(c, proj1(s), proj2(s))
                elif isinstance(w, Sum) and self.logical(fr, w):
                    left_fr = fr.push(w.left, scrut=s)
                    right_fr = fr.push(w.right, scrut=s)
                    for j in range(1, rest):
                        for l, c1 in self.inf(left_fr, j):
                            if not mentions(l, 0) or mentions(c1, 0):
                                continue
                            for r in self.chk(right_fr, c1, rest - j):
                                yield Case(s, l, r, ("u", "v")), shift(c1, -1)


def _decide(ctx: Context, p: PrimPred, fuel: Fuel):
    try:
        return decide_prim(ctx, p.tag, p.args, fuel)
    except TypeCheckError:
        return None


# --- leaves ------------------------------------------------------------------------


def _closed_subterms(t: Term, depth: int = 0):
    if not any(i >= 0 for i in free_vars(t)):
        yield t
    for c, nb in children(t):
        yield from _closed_subterms(c, depth + nb)


def _harvest(ctx: Context, types: list, fuel: Fuel) -> list:
    """Primitive witnesses for closed predicates and identities mentioned in ``types``."""
    out: list = []
    seen: set = set()
    for ty in types:
        for sub in _closed_subterms(ty):
            if sub in seen:
                continue
            if isinstance(sub, PrimPred):
                seen.add(sub)
                v = _decide(ctx, sub, fuel)
                if v is True:
                    out.append((PrimProof(sub.tag, sub.args), sub))
                elif v is False:
                    out.append((PrimRefute(sub.tag, sub.args), Pi(sub, Empty(), "_")))
            elif isinstance(sub, IdType):
                seen.add(sub)
                try:
                    if literals_distinct(ctx, sub.lhs, sub.rhs, fuel):
                        out.append((Distinct(sub.carrier, sub.lhs, sub.rhs), Pi(sub, Empty(), "_")))
                except TypeCheckError:
                    pass
    return out


def _fact_entry(f):
    """Normalise the accepted fact shapes to a context entry."""
    if isinstance(f, (Decl, Def)):
        return f
    if isinstance(f, tuple):
        return Decl(f[0], f[1])
    term = getattr(f, "term", None)
    return Def(f.id, term, f.type) if term is not None else Decl(f.id, f.type)


def prepare(ctx: Context, facts, fuel: Fuel) -> tuple[Context, list]:
    """Context with the facts defined, and the named leaves for search.

    Leaves are the facts themselves plus global entries whose type is a
    proposition or a sum of propositions (axioms and lemmas).
    """
    leaves: list = []
    names: set = set()
    for f in facts:
        e = _fact_entry(f)
        if not ctx.has_name(e.name):
            ctx = ctx.define(e)
        leaves.append((Const(e.name), e.type))
        names.add(e.name)
    for e in list(ctx.entries):
        if e.name in names or not ctx.has_name(e.name):
            continue
        try:
            if _logical(ctx, e.type, fuel):
                leaves.append((Const(e.name), e.type))
        except TypeCheckError:
            pass
    return ctx, leaves


def _logical(ctx: Context, ty: Term, fuel: Fuel) -> bool:
    """A proposition, or a disjunction of them (sums live outside Prop)."""
    w = whnf(ty, ctx, fuel)
    if isinstance(w, Sum):
        return _logical(ctx, w.left, fuel) and _logical(ctx, w.right, fuel)
    return isinstance(sort_of(ctx, w, fuel), Prop)


# --- public entry point ----------------------------------------------------------------


def _valid(ctx: Context, t: Term, goal: Term, fuel: Fuel) -> bool:
    try:
        check(ctx, t, goal, fuel)
        return True
    except TypeCheckError:
        return False


def search_proof(ctx: Context, facts, goal: Term, budget: Optional[Budget] = None, *, fuel=None, refute: bool = True):
    """Search for a proof of ``goal`` (or of ``goal -> Empty``) within ``budget``.

    ``facts`` are knowledge items, ``Decl``/``Def`` entries or ``(name, type)``
    pairs. Returns Found(proof), Refuted(counterproof) or Unknown(reason),
    where reason ``"depth"`` means every candidate up to the size bound was
    examined.
    """
    budget = budget or Budget()
    fuel = fuel if fuel is not None else budget.start()
    try:
        fuel.spend()
        ctx, leaves = prepare(ctx, facts, fuel)
        quick = synthesize(ctx, goal, fuel)
        if isinstance(quick, Unknown) and quick.reason in ("fuel", "timeout"):
            return quick
        neg = Pi(goal, Empty(), "_")
        if isinstance(quick, Found) and _valid(ctx, quick.proof, goal, fuel):
            return quick
        if refute and isinstance(quick, Refuted) and _valid(ctx, quick.counterproof, neg, fuel):
            return quick
        leaves = leaves + _harvest(ctx, [goal] + [ty for _, ty in leaves], fuel)
        engine = _Engine(ctx, leaves, fuel)
        root = engine.root
        for n in range(1, budget.depth + 1):
            for t in engine.chk(root, goal, n):
                if _valid(ctx, t, goal, fuel):
                    return Found(t)
            if refute:
                for t in engine.chk(root, neg, n):
                    if _valid(ctx, t, neg, fuel):
                        return Refuted(t)
        return Unknown("depth")
    except FuelExhausted as exc:
        return Unknown(exc.reason)


# --- root cause construction -----------------------------------------------------------


class NotFound:
    """No assignment satisfies the constraints at the given budget."""

    def __repr__(self) -> str:
        return "NotFound()"

    def __eq__(self, other) -> bool:
        return isinstance(other, NotFound)

    def __hash__(self) -> int:
        return hash("NotFound")


@dataclass(frozen=True)
class Constraint:
    """One verified primitive fact, with its literal arguments."""

    relation: str
    args: tuple  # literal terms

    def render(self) -> str:
        from .surface import print_term, time_of_day

        def lit(t):
            if isinstance(t, TimeLit) and t.kind is TimeKind.TIMESTAMP:
                return time_of_day(t)
            return print_term(t)

        sym = {
            "LeVal": "<=", "LtVal": "<", "EqVal": "=", "LeTime": "<=", "LtTime": "<", "Id": "=",
        }.get(self.relation)
        if sym is not None and len(self.args) == 2:
            return f"{lit(self.args[0])} {sym} {lit(self.args[1])}"
        if self.relation == "ExceedsPct":
            x, base, pct = self.args
            return f"{lit(x)} > {lit(pct)}% of {lit(base)}"
        return f"{self.relation}({', '.join(lit(a) for a in self.args)})"


@dataclass(frozen=True)
class RootCauseReport:
    failure: object  # KnowledgeItem
    witnesses: tuple  # ((binder name, KnowledgeItem), ...) in layer order
    causal_proof: Term  # proof of the final propositional layer
    term: Term  # the whole report, checked against report_type
    report_type: Term
    constraints: tuple = ()

    @property
    def anomaly(self):
        return self.witnesses[0][1] if self.witnesses else None

    @property
    def step(self):
        return self.witnesses[1][1] if len(self.witnesses) > 1 else None


def _tie_key(item, ctx: Context, fuel: Fuel) -> tuple:
    nf = normal_form(item.term, ctx, fuel)
    times: list = []
    ids: list = []

    def walk(t):
        if isinstance(t, TimeLit) and t.kind is TimeKind.TIMESTAMP:
            times.append(t.value)
        elif isinstance(t, IdLit):
            ids.append(t.value)
        for c, _ in children(t):
            walk(c)

    walk(nf)
    return (min(times) if times else float("inf"), tuple(ids), item.id)


def _constraints(ctx: Context, prop: Term, fuel: Fuel) -> tuple:
    out: list = []

    def walk(p):
        w = whnf(p, ctx, fuel)
        if isinstance(w, Sigma) and not mentions(w.snd, 0):
            walk(w.fst)
            walk(shift(w.snd, -1))
        elif isinstance(w, PrimPred):
            out.append(Constraint(w.tag.value, tuple(normal_form(a, ctx, fuel) for a in w.args)))
        elif isinstance(w, IdType):
            out.append(Constraint("Id", (normal_form(w.lhs, ctx, fuel), normal_form(w.rhs, ctx, fuel))))

    walk(prop)
    return tuple(out)


def build_root_cause(ctx: Context, facts, failure, report_type: Term, budget: Optional[Budget] = None):
    """Fill the layers of ``report_type`` for a fixed failure item.

    ``report_type`` is a chain ``(f : F) * (x1 : A1) * ... * P`` whose last
    layer is a proposition. Each data layer is drawn from the facts of the
    matching type, earliest timestamp first; the proposition is decided by
    the primitive decision procedure (falling back to proof search).
    Returns a RootCauseReport, NotFound() or Unknown(reason).
    """
    budget = budget or Budget()
    fuel = budget.start()
    try:
        full, _ = prepare(ctx, facts, fuel)
        items = [f for f in facts if hasattr(f, "term")]
        rt = whnf(report_type, full, fuel)
        if not isinstance(rt, Sigma) or not _equal(full, failure.type, rt.fst, fuel):
            return NotFound()
        engine = _Engine(full, [], fuel)
        outcome = _fill(full, facts, items, instantiate(rt.snd, Const(failure.id)), budget, fuel, engine)
        if isinstance(outcome, (NotFound, Unknown)):
            return outcome
        chosen, prop, proof = outcome
        term = proof
        for _, it in reversed(chosen):
            term = Pair(Const(it.id), term)
        term = Pair(Const(failure.id), term)
        check(full, term, report_type, fuel)
        return RootCauseReport(
            failure=failure,
            witnesses=tuple(chosen),
            causal_proof=proof,
            term=term,
            report_type=report_type,
            constraints=_constraints(full, prop, fuel),
        )
    except FuelExhausted as exc:
        return Unknown(exc.reason)


def _fill(ctx, facts, items, layer: Term, budget: Budget, fuel: Fuel, engine: _Engine):
    w = whnf(layer, ctx, fuel)
    if engine.logical(engine.root, layer):
        r = synthesize(ctx, layer, fuel)
        if isinstance(r, Unknown) and r.reason == "undecided":
            r = search_proof(ctx, facts, layer, budget, fuel=fuel, refute=False)
        if isinstance(r, Found):
            return [], layer, r.proof
        if isinstance(r, Unknown) and r.reason in ("fuel", "timeout"):
            return r
        return NotFound()
    if not isinstance(w, Sigma):
        return NotFound()
    candidates = [it for it in items if _equal(ctx, it.type, w.fst, fuel)]
    candidates.sort(key=lambda it: _tie_key(it, ctx, fuel))
    for it in candidates:
        sub = _fill(ctx, facts, items, instantiate(w.snd, Const(it.id)), budget, fuel, engine)
        if isinstance(sub, Unknown):
            return sub
        if isinstance(sub, NotFound):
            continue
        chosen, prop, proof = sub
        return [(w.name, it)] + chosen, prop, proof
    return NotFound()


# --- counterfactual contribution -------------------------------------------------------


class Contribution(enum.Enum):
    NECESSARY = "Necessary"
    REDUNDANT = "Redundant"


class PreconditionUnproven(Exception):
    """The goal is not provable from the full facts, so removal says nothing."""


def _fact_name(f) -> str:
    if isinstance(f, tuple):
        return f[0]
    return getattr(f, "id", None) or f.name


def counterfactual_contrib(ctx: Context, facts, removed: str, goal: Term, budget: Optional[Budget] = None):
    """Necessary if ``goal`` becomes unprovable without ``removed``, Redundant if not.

    Works on a shadow copy of ``facts``; returns Unknown when the shadow
    search ran out of fuel or time.
    """
    budget = budget or Budget()
    facts = list(facts)
    if removed not in {_fact_name(f) for f in facts}:
        raise KeyError(f"no fact named {removed!r}")
    full = search_proof(ctx, facts, goal, budget, refute=False)
    if not isinstance(full, Found):
        raise PreconditionUnproven(f"goal not provable from the full facts ({full})")
    shadow = [f for f in facts if _fact_name(f) != removed]
    r = search_proof(ctx, shadow, goal, budget, refute=False)
    if isinstance(r, Found):
        return Contribution.REDUNDANT
    if isinstance(r, Unknown) and r.reason in ("fuel", "timeout"):
        return r
    return Contribution.NECESSARY


# --- watchers ------------------------------------------------------------------------


@dataclass(frozen=True)
class Watcher:
    """Join rule over Active items.

    ``binders`` are (name, type) pairs; each type may mention earlier
    binders. ``when`` and ``guard`` are propositions over the binders,
    ``report`` is (name, report type, index of the failure binder) and
    ``emit_args`` lives in the scope of the binders plus the report.
    """

    name: str
    binders: tuple
    event: str
    emit_args: Term
    when: Optional[Term] = None
    guard: Optional[Term] = None
    report: Optional[tuple] = None


def close_over(t: Term, values: list) -> Term:
    """Substitute closed ``values`` for the enclosing binders (outermost first)."""
    for v in reversed(values):
        t = instantiate(t, v)
    return t


def _decided(ctx: Context, facts, prop: Term, budget: Budget, fuel: Fuel) -> bool:
    r = synthesize(ctx, prop, fuel)
    if isinstance(r, Unknown) and r.reason == "undecided":
        r = search_proof(ctx, facts, prop, Budget(budget.fuel, min(budget.depth, 8), budget.timeout_ms), refute=False)
    return isinstance(r, Found)


def run_watchers(state, env, budget: Optional[Budget] = None) -> list:
    """Events emitted by every watcher combination not fired before."""
    from .kernel import Event, view_context

    budget = budget or Budget()
    fuel = budget.start()
    view = view_context(env.ctx, state)
    active = state.active()
    facts = [Decl(it.id, it.type) for it in active]
    emitted: list = []
    for w in env.watchers:
        defn = env.events.get(w.event)
        if defn is None:
            continue

        def combos(k: int, chosen: list):
            if k == len(w.binders):
                yield list(chosen)
                return
            ty = close_over(w.binders[k][1], [Const(c.id) for c in chosen])
            for it in active:
                if _equal(view, it.type, ty, fuel):
                    chosen.append(it)
                    yield from combos(k + 1, chosen)
                    chosen.pop()

        try:
            for chosen in combos(0, []):
                key = (w.name,) + tuple(it.id for it in chosen)
                if key in state.fired:
                    continue
                vals = [Const(it.id) for it in chosen]
                if w.when is not None and not _decided(view, facts, close_over(w.when, vals), budget, fuel):
                    continue
                if w.guard is not None and not _decided(view, facts, close_over(w.guard, vals), budget, fuel):
                    continue
                if w.report is not None:
                    _, rtype, idx = w.report
                    rep = build_root_cause(env.ctx, active, chosen[idx], close_over(rtype, vals), budget)
                    if not isinstance(rep, RootCauseReport):
                        continue
                    vals = vals + [rep.term]
                args = close_over(w.emit_args, vals)
                from .kernel import detach

                emitted.append(Event(defn, detach(args, state, state.clock), origin=key))
        except FuelExhausted:
            continue
    return emitted
