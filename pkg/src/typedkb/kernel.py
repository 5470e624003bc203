"""Knowledge state, proof-carrying events and the single transition rule.

A state holds the knowledge items, a logical clock and a queue of pending
events. ``kstep`` takes the head event, checks (or constructs) a proof of
its precondition against the current state, applies its declarative
effects, advances the clock and checks the postcondition on the result.
Any failure leaves the input state untouched.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .reducer import normal_form, reduce
from .resources import Budget, FuelExhausted, Found, Refuted, Unknown, as_fuel
from .terms import (
    VAL,
    Const,
    Context,
    Decl,
    Def,
    Empty,
    IdLit,
    Term,
    TimeLit,
    ValLit,
    canonical_bytes,
    consts,
    instantiate,
    map_children,
    term_hash,
    to_data,
)
from .typechecker import TypeCheckError, check, sort_of, synthesize

GENESIS = "0" * 64
CLOCK_NAME = "now"


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _digest_json(obj) -> str:
    return _sha(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())


# --- items and events -------------------------------------------------------------


class Status(enum.Enum):
    ACTIVE = "Active"
    INVALIDATED = "Invalidated"


@dataclass(frozen=True)
class KnowledgeItem:
    """A committed fact: ``term : type``. Terms and types mention only globals."""

    id: str
    term: Term
    type: Term
    committed_at: int = 0
    status: Status = Status.ACTIVE
    refutation: object = None  # Term (from unify) or the invalidating event's name

    @property
    def active(self) -> bool:
        return self.status is Status.ACTIVE

    def invalidated(self, reason) -> "KnowledgeItem":
        return replace(self, status=Status.INVALIDATED, refutation=reason)

    def to_data(self) -> list:
        reason = self.refutation
        if isinstance(reason, Term):
            reason = ["term", to_data(reason, names=False)]
        return [
            self.id,
            to_data(self.term, names=False),
            to_data(self.type, names=False),
            self.committed_at,
            self.status.value,
            reason,
        ]


@dataclass(frozen=True)
class Effect:
    """One declarative effect; terms are in the scope of the event argument (Var 0)."""

    kind: str  # add | invalidate | enqueue
    target: tuple = ()  # id template pieces (str or Term), or (event name,)
    type: Optional[Term] = None
    value: Optional[Term] = None


@dataclass(frozen=True)
class EventDef:
    """Event schema. ``pre`` and ``post`` are propositions over Var 0 (the args)."""

    name: str
    args_type: Term
    pre: Optional[Term] = None
    post: Optional[Term] = None
    effects: tuple = ()
    arg_name: str = "x"


@dataclass(frozen=True)
class Event:
    defn: EventDef
    args: Term
    prf: Optional[Term] = None
    origin: Optional[tuple] = None  # watcher key that produced this event

    @property
    def name(self) -> str:
        return self.defn.name

    def to_data(self) -> dict:
        return {
            "name": self.name,
            "args": to_data(self.args),
            "prf": to_data(self.prf),
            "origin": list(self.origin) if self.origin else None,
        }


@dataclass
class Env:
    """Global definitions plus the event, template and watcher registries."""

    ctx: Context = field(default_factory=Context)
    events: dict = field(default_factory=dict)
    templates: list = field(default_factory=list)
    watchers: list = field(default_factory=list)
    facts: list = field(default_factory=list)  # initial KnowledgeItems

    def event_from_data(self, d: dict) -> Event:
        from .terms import from_data

        defn = self.events.get(d["name"])
        if defn is None:
            raise KeyError(f"unknown event {d['name']!r}")
        origin = tuple(tuple(x) if isinstance(x, list) else x for x in d["origin"]) if d.get("origin") else None
        return Event(defn, from_data(d["args"]), from_data(d.get("prf")), origin)


# --- state ----------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelState:
    """Knowledge items (ordered by id), logical clock and pending events.

    ``seq`` and ``head`` track the transition log; ``fired`` remembers
    watcher firings. None of the three enters the state digest.
    """

    knowledge: tuple = ()
    clock: int = 0
    pending: tuple = ()
    seq: int = 0
    head: str = GENESIS
    fired: frozenset = frozenset()

    def item(self, id_: str) -> Optional[KnowledgeItem]:
        for it in self.knowledge:
            if it.id == id_:
                return it
        return None

    def active(self) -> list:
        return [it for it in self.knowledge if it.active]


def initial_state(env: Env) -> KernelState:
    return KernelState(knowledge=tuple(sorted(env.facts, key=lambda it: it.id)))


def get_knowledge(state: KernelState) -> tuple:
    return state.knowledge


def now(state: KernelState) -> int:
    return state.clock


def state_hash(state: KernelState) -> str:
    """SHA-256 over knowledge (by id), clock and pending events."""
    return _digest_json(
        {
            "knowledge": [it.to_data() for it in sorted(state.knowledge, key=lambda it: it.id)],
            "clock": state.clock,
            "pending": [
                [e.name, to_data(e.args, names=False), to_data(e.prf, names=False)]
                for e in state.pending
            ],
        }
    )


class Equality(enum.Enum):
    EQUAL = "Equal"
    NOT_EQUAL = "NotEqual"


def verify_id(a: KernelState, b: KernelState) -> Equality:
    return Equality.EQUAL if state_hash(a) == state_hash(b) else Equality.NOT_EQUAL


def view_context(ctx: Context, state: KernelState, clock: Optional[int] = None) -> Context:
    """Globals, then ``now : Val``, then every Active item as a definition."""
    c = ctx
    if not c.has_name(CLOCK_NAME):
        c = c.define(Def(CLOCK_NAME, ValLit(state.clock if clock is None else clock), VAL))
    for it in state.knowledge:
        if it.active and not c.has_name(it.id):
            c = c.define(Def(it.id, it.term, it.type))
    return c


def _inline(t: Term, subst: dict) -> Term:
    """Replace constants named in ``subst`` by closed terms."""
    if isinstance(t, Const):
        return subst.get(t.name, t)
    return map_children(t, lambda c, nb: _inline(c, subst))


def detach(t: Term, state: KernelState, clock: int) -> Term:
    """Make ``t`` independent of the state: inline item references and the clock."""
    subst = {CLOCK_NAME: ValLit(clock)}
    for _ in range(len(state.knowledge) + 1):
        names = consts(t)
        todo = {n: subst[n] for n in names if n in subst}
        todo.update({it.id: it.term for it in state.knowledge if it.id in names})
        if not todo:
            return t
        t = _inline(t, todo)
    return t


# --- kernel operations ---------------------------------------------------------------------


class IllTypedPayload(Exception):
    pass


class RejectReason(enum.Enum):
    MISSING_PRE_PROOF = "MissingPreProof"
    PRE_REFUTED = "PreRefuted"
    POST_VIOLATED = "PostViolated"
    ILL_TYPED_PAYLOAD = "IllTypedPayload"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    OP_FAILED = "OpFailed"


@dataclass(frozen=True)
class TransitionRecord:
    seq: int
    event: str
    args_digest: str
    digest_before: str
    digest_after: str
    clock_before: int
    clock_after: int
    pre_proof_digest: str
    post_proof_digest: str
    trace_digest: str
    prev_hash: str
    chain_hash: str = ""
    payload: dict = field(default_factory=dict, compare=False)

    def body(self) -> dict:
        return {
            "seq": self.seq,
            "event": self.event,
            "args_digest": self.args_digest,
            "digest_before": self.digest_before,
            "digest_after": self.digest_after,
            "clock_before": self.clock_before,
            "clock_after": self.clock_after,
            "pre_proof_digest": self.pre_proof_digest,
            "post_proof_digest": self.post_proof_digest,
            "trace_digest": self.trace_digest,
            "prev_hash": self.prev_hash,
            "payload": self.payload,
        }

    def compute_hash(self) -> str:
        body = json.dumps(self.body(), sort_keys=True, separators=(",", ":"))
        return _sha((self.prev_hash + body).encode())

    def sealed(self) -> "TransitionRecord":
        return replace(self, chain_hash=self.compute_hash())

    def to_json(self) -> dict:
        d = self.body()
        d["chain_hash"] = self.chain_hash
        return d


@dataclass(frozen=True)
class Transitioned:
    state: KernelState
    record: TransitionRecord


@dataclass(frozen=True)
class Quiescent:
    state: KernelState


@dataclass(frozen=True)
class Rejected:
    state: KernelState
    reason: RejectReason
    detail: str = ""
    event: Optional[Event] = None


def schedule(state: KernelState, env: Env, e: Event, fuel=None) -> KernelState:
    """Append ``e`` to the pending queue after checking its payload."""
    try:
        check(env.ctx, e.args, e.defn.args_type, as_fuel(fuel))
    except TypeCheckError as exc:
        raise IllTypedPayload(f"{e.name}: {exc}") from None
    return replace(state, pending=state.pending + (e,))


def drop_head(state: KernelState, mark_fired: bool = True) -> KernelState:
    """Remove the head event (after a rejection), remembering its origin."""
    if not state.pending:
        return state
    head = state.pending[0]
    fired = state.fired | {head.origin} if (mark_fired and head.origin) else state.fired
    return replace(state, pending=state.pending[1:], fired=fired)


def tick(state: KernelState) -> KernelState:
    return replace(state, clock=state.clock + 1)


class _Reject(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


def _prove(view: Context, facts: list, goal: Term, budget: Budget, fuel, what: str) -> Term:
    """Construct a proof of ``goal`` or raise _Reject."""
    r = synthesize(view, goal, fuel)
    if isinstance(r, Unknown) and r.reason == "undecided":
        from .search import search_proof

        r = search_proof(view, facts, goal, budget, fuel=fuel)
    if isinstance(r, Found):
        return r.proof
    if isinstance(r, Refuted):
        raise _Reject(RejectReason.PRE_REFUTED if what == "pre" else RejectReason.POST_VIOLATED, f"{what} refuted")
    if r.reason in ("fuel", "timeout"):
        raise _Reject(RejectReason.BUDGET_EXHAUSTED, f"{what}: {r.reason}")
    raise _Reject(RejectReason.MISSING_PRE_PROOF if what == "pre" else RejectReason.POST_VIOLATED, f"no proof of {what}")


def _render_id(pieces: tuple, args: Term, view: Context, fuel) -> str:
    out = []
    for p in pieces:
        if isinstance(p, str):
            out.append(p)
            continue
        v = normal_form(instantiate(p, args), view, fuel)
        if isinstance(v, IdLit):
            out.append(v.value)
        elif isinstance(v, ValLit):
            out.append(str(v.value))
        elif isinstance(v, TimeLit):
            out.append(str(v.value))
        else:
            raise _Reject(RejectReason.OP_FAILED, "item name hole did not reduce to a literal")
    name = "".join(out)
    if not name:
        raise _Reject(RejectReason.OP_FAILED, "empty item name")
    return name


def _active_facts(state: KernelState) -> list:
    return [Decl(it.id, it.type) for it in state.knowledge if it.active]


def kstep(state: KernelState, env: Env, budget: Optional[Budget] = None, fuel=None):
    """One transition for the head pending event.

    Returns Quiescent, Transitioned(new state, record) or Rejected(reason)
    carrying the unchanged input state.
    """
    if not state.pending:
        return Quiescent(state)
    budget = budget or Budget()
    fuel = fuel if fuel is not None else budget.start()
    e = state.pending[0]
    try:
        return _kstep(state, env, e, budget, fuel)
    except _Reject as r:
        return Rejected(state, r.reason, r.detail, e)
    except FuelExhausted as exc:
        return Rejected(state, RejectReason.BUDGET_EXHAUSTED, exc.reason, e)


def _kstep(state: KernelState, env: Env, e: Event, budget: Budget, fuel) -> Transitioned:
    d = e.defn
    try:
        check(env.ctx, e.args, d.args_type, fuel)
    except TypeCheckError as exc:
        raise _Reject(RejectReason.ILL_TYPED_PAYLOAD, str(exc)) from None
    view = view_context(env.ctx, state)
    facts = _active_facts(state)

    # precondition
    pre_proof = None
    trace_src = e.args
    if d.pre is not None:
        goal = instantiate(d.pre, e.args)
        trace_src = goal
        if e.prf is not None:
            try:
                check(view, e.prf, goal, fuel)
            except TypeCheckError as exc:
                raise _Reject(RejectReason.MISSING_PRE_PROOF, f"proof does not establish pre: {exc}") from None
            pre_proof = e.prf
        else:
            pre_proof = _prove(view, facts, goal, budget, fuel, "pre")
    try:
        _, trace = reduce(trace_src, view, fuel)
    except FuelExhausted as exc:
        raise _Reject(RejectReason.BUDGET_EXHAUSTED, exc.reason) from None

    # effects
    clock_after = state.clock + 1
    items = {it.id: it for it in state.knowledge}
    enqueued = []
    for eff in d.effects:
        if eff.kind == "add":
            name = _render_id(eff.target, e.args, view, fuel)
            if env.ctx.has_name(name) or name == CLOCK_NAME:
                raise _Reject(RejectReason.OP_FAILED, f"item name {name!r} clashes with a global")
            old = items.get(name)
            if old is not None and old.active:
                raise _Reject(RejectReason.OP_FAILED, f"item {name!r} is already active")
            ty = instantiate(eff.type, e.args)
            value = instantiate(eff.value, e.args)
            try:
                sort_of(view, ty, fuel)
                check(view, value, ty, fuel)
            except TypeCheckError as exc:
                raise _Reject(RejectReason.ILL_TYPED_PAYLOAD, f"{name}: {exc}") from None
            items[name] = KnowledgeItem(
                name,
                detach(value, state, state.clock),
                detach(ty, state, state.clock),
                clock_after,
            )
        elif eff.kind == "invalidate":
            name = _render_id(eff.target, e.args, view, fuel)
            old = items.get(name)
            if old is None or not old.active:
                raise _Reject(RejectReason.OP_FAILED, f"no active item {name!r} to invalidate")
            items[name] = old.invalidated(d.name)
        elif eff.kind == "enqueue":
            target = env.events.get(eff.target[0])
            if target is None:
                raise _Reject(RejectReason.OP_FAILED, f"unknown event {eff.target[0]!r}")
            arg = detach(instantiate(eff.value, e.args), state, state.clock)
            try:
                check(env.ctx, arg, target.args_type, fuel)
            except TypeCheckError as exc:
                raise _Reject(RejectReason.ILL_TYPED_PAYLOAD, f"enqueue {target.name}: {exc}") from None
            enqueued.append(Event(target, arg))
        else:
            raise _Reject(RejectReason.OP_FAILED, f"unknown effect {eff.kind!r}")

    fired = state.fired | {e.origin} if e.origin else state.fired
    candidate = KernelState(
        knowledge=tuple(items[k] for k in sorted(items)),
        clock=clock_after,
        pending=state.pending[1:] + tuple(enqueued),
        seq=state.seq,
        head=state.head,
        fired=fired,
    )

    # postcondition on the candidate state
    post_proof = None
    if d.post is not None:
        post_view = view_context(env.ctx, candidate)
        goal = instantiate(d.post, e.args)
        post_proof = _prove(post_view, _active_facts(candidate), goal, budget, fuel, "post")

    record = TransitionRecord(
        seq=state.seq + 1,
        event=d.name,
        args_digest=term_hash(e.args),
        digest_before=state_hash(state),
        digest_after=state_hash(candidate),
        clock_before=state.clock,
        clock_after=clock_after,
        pre_proof_digest=term_hash(pre_proof) if pre_proof is not None else "",
        post_proof_digest=term_hash(post_proof) if post_proof is not None else "",
        trace_digest=_digest_json([s.to_json() for s in trace]),
        prev_hash=state.head,
        payload=e.to_data(),
    ).sealed()
    return Transitioned(replace(candidate, seq=record.seq, head=record.chain_hash), record)


def run_to_quiescence(state: KernelState, env: Env, budget: Optional[Budget] = None, limit: int = 10_000):
    """Drive kstep until the queue is empty; rejected heads are dropped."""
    results = []
    for _ in range(limit):
        r = kstep(state, env, budget)
        if isinstance(r, Quiescent):
            break
        results.append(r)
        state = r.state if isinstance(r, Transitioned) else drop_head(r.state)
    return state, results


# --- consistency-preserving insertion ---------------------------------------------------


UNIFY_BUDGET = Budget(fuel=10_000, depth=4)


@dataclass(frozen=True)
class Merged:
    state: KernelState


@dataclass(frozen=True)
class Quarantined:
    state: KernelState
    refutation: Term


def unify(state: KernelState, env: Env, item: KnowledgeItem, budget: Optional[Budget] = None):
    """Insert ``item`` unless a bounded search derives Empty from it and the Active items.

    Returns Merged, Quarantined (item stored Invalidated with the refutation)
    or Unknown (state unchanged) when the search ran out of fuel or time.
    """
    from .search import search_proof

    budget = budget or UNIFY_BUDGET
    fuel = budget.start()
    view = view_context(env.ctx, state)
    try:
        sort_of(view, item.type, fuel)
        check(view, item.term, item.type, fuel)
    except TypeCheckError as exc:
        raise IllTypedPayload(f"{item.id}: {exc}") from None
    except FuelExhausted as exc:
        return Unknown(exc.reason)
    if state.item(item.id) is not None or env.ctx.has_name(item.id):
        raise IllTypedPayload(f"item name {item.id!r} already in use")
    item = replace(
        item,
        term=detach(item.term, state, state.clock),
        type=detach(item.type, state, state.clock),
        committed_at=state.clock,
    )
    facts = _active_facts(state) + [Decl(item.id, item.type)]
    ctx = view_context(env.ctx, replace(state, knowledge=state.knowledge + (item,)))
    r = search_proof(ctx, facts, Empty(), budget, fuel=fuel, refute=False)

    def insert(it: KnowledgeItem) -> KernelState:
        return replace(state, knowledge=tuple(sorted(state.knowledge + (it,), key=lambda x: x.id)))

    if isinstance(r, Found):
        return Quarantined(insert(item.invalidated(r.proof)), r.proof)
    if isinstance(r, Unknown) and r.reason in ("fuel", "timeout"):
        return r
    return Merged(insert(item))


__all__ = [
    "Effect", "Env", "Equality", "Event", "EventDef", "GENESIS", "IllTypedPayload",
    "KernelState", "KnowledgeItem", "Merged", "Quarantined", "Quiescent", "RejectReason",
    "Rejected", "Status", "TransitionRecord", "Transitioned", "canonical_bytes", "detach",
    "drop_head", "get_knowledge", "initial_state", "kstep", "now", "run_to_quiescence",
    "schedule", "state_hash", "tick", "unify", "verify_id", "view_context",
]
