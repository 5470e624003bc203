import random
from dataclasses import replace

import pytest
from conftest import load_scenario
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles.inhabit import BOT, formulas, min_proof_size, to_term
from typedkb.kernel import (
    UNIFY_BUDGET,
    Effect,
    Env,
    Equality,
    Event,
    IllTypedPayload,
    KnowledgeItem,
    Merged,
    Quarantined,
    Quiescent,
    RejectReason,
    Rejected,
    Transitioned,
    drop_head,
    get_knowledge,
    initial_state,
    kstep,
    now,
    run_to_quiescence,
    schedule,
    state_hash,
    tick,
    unify,
    verify_id,
    view_context,
)
from typedkb.resources import Budget, Found, Unknown
from typedkb.search import search_proof
from typedkb.surface import parse_term
from typedkb.terms import (
    PROP,
    VAL,
    Const,
    Context,
    Decl,
    Empty,
    IdType,
    Lam,
    ValLit,
    Var,
)
from typedkb.typechecker import check, sort_of


def _event(env, name, args, prf=None):
    return Event(env.events[name], parse_term(args), prf)


def _pump(kpa, pump="P1"):
    env = load_scenario("pump")
    return env, _event(env, "start_pump", f'<"{pump}", {kpa}>')


# --- worked examples -----------------------------------------------------------------


def test_emergency_stop_transition():
    env = load_scenario("estop")
    s0 = initial_state(env)
    assert s0.item("status_M1").term == Const("Running")
    s1 = schedule(s0, env, _event(env, "e_stop", '<"M1", 82>'))
    r = kstep(s1, env)
    assert isinstance(r, Transitioned)
    assert r.state.item("status_M1").term == Const("Stopped")
    assert r.state.pending == ()
    assert r.record.clock_after == r.record.clock_before + 1 == 1


def test_unsafe_pressure_is_rejected_without_change():
    env, e = _pump(120)
    s = schedule(initial_state(env), env, e)
    r = kstep(s, env)
    assert isinstance(r, Rejected) and r.reason is RejectReason.PRE_REFUTED
    assert verify_id(s, r.state) is Equality.EQUAL


def test_empty_queue_is_quiescent():
    env = load_scenario("pump")
    s = initial_state(env)
    assert kstep(s, env) == Quiescent(s)


def test_below_threshold_reading_is_refuted_by_the_elaborated_pre():
    env = load_scenario("estop")
    s = schedule(initial_state(env), env, _event(env, "e_stop", '<"M1", 79>'))
    r = kstep(s, env)
    assert isinstance(r, Rejected) and r.reason is RejectReason.PRE_REFUTED


def test_post_violation_rejects():
    env = load_scenario("pump")
    defn = env.events["start_pump"]
    wrong = replace(defn, post=IdType(Const("PumpState"), Const("pump_P1"), Const("Idle")))
    s = schedule(initial_state(env), env, Event(wrong, parse_term('<"P1", 50>')))
    r = kstep(s, env)
    assert isinstance(r, Rejected) and r.reason is RejectReason.POST_VIOLATED
    assert verify_id(s, r.state) is Equality.EQUAL


def test_bad_effect_rejects():
    env = load_scenario("pump")
    defn = replace(env.events["start_pump"], effects=(Effect("invalidate", ("no_such_item",)),), post=None)
    s = schedule(initial_state(env), env, Event(defn, parse_term('<"P1", 50>')))
    r = kstep(s, env)
    assert isinstance(r, Rejected) and r.reason is RejectReason.OP_FAILED


def test_forged_pre_proof_rejects():
    env = load_scenario("estop")
    # a proof of the wrong claim: refl where a pair is needed
    e = Event(env.events["e_stop"], parse_term('<"M1", 82>'), parse_term("refl"))
    r = kstep(schedule(initial_state(env), env, e), env)
    assert isinstance(r, Rejected) and r.reason is RejectReason.MISSING_PRE_PROOF


def test_ill_typed_payload_is_not_scheduled():
    env = load_scenario("pump")
    with pytest.raises(IllTypedPayload):
        schedule(initial_state(env), env, _event(env, "start_pump", '<5, "P1">'))


def test_zero_budget_rejects_as_exhausted():
    env, e = _pump(50)
    s = schedule(initial_state(env), env, e)
    r = kstep(s, env, Budget(fuel=0))
    assert isinstance(r, Rejected) and r.reason is RejectReason.BUDGET_EXHAUSTED
    assert verify_id(s, r.state) is Equality.EQUAL


# --- queue and clock -------------------------------------------------------------------


def test_schedule_appends_in_order():
    env, a = _pump(50)
    _, b = _pump(60)
    s0 = initial_state(env)
    s1 = schedule(s0, env, a)
    assert len(s1.pending) == 1 and s1.knowledge == s0.knowledge
    s2 = schedule(s1, env, b)
    assert s2.pending == (a, b)
    assert now(s2) == now(s0)


def test_tick():
    s = replace(initial_state(Env()), clock=5)
    assert tick(s).clock == 6 and tick(tick(s)).clock == 7
    assert tick(s).knowledge == s.knowledge
    assert verify_id(s, s) is Equality.EQUAL
    assert verify_id(s, tick(s)) is Equality.NOT_EQUAL


def test_now_and_knowledge_views():
    env = load_scenario("pump")
    s = initial_state(env)
    assert now(s) == 0
    r = unify(s, env, KnowledgeItem("reading_1", ValLit(25), VAL))
    assert isinstance(r, Merged)
    assert "reading_1" in {it.id for it in get_knowledge(r.state)}
    assert state_hash(r.state) != state_hash(s)


def test_hash_ignores_binder_names():
    a = KnowledgeItem("f", Lam(VAL, Var(0), "x"), parse_term("Val -> Val"))
    b = KnowledgeItem("f", Lam(VAL, Var(0), "reading"), parse_term("Val -> Val"))
    assert state_hash(initial_state(Env(facts=[a]))) == state_hash(initial_state(Env(facts=[b])))


# --- unify ---------------------------------------------------------------------------


def _toy(axioms):
    """Context declaring atoms P, Q, R and axioms a0.. of the given formula types."""
    ctx = Context()
    for a in ("P", "Q", "R"):
        ctx = ctx.define(Decl(a, PROP))
    for i, f in enumerate(axioms):
        ctx = ctx.define(Decl(f"a{i}", to_term(f)))
    return Env(ctx=ctx)


def test_standing_refutation_quarantines():
    P = ("atom", "P")
    env = _toy([("imp", P, BOT), P])
    s = initial_state(env)
    s = unify(s, env, KnowledgeItem("h", Const("a0"), to_term(("imp", P, BOT)))).state
    r = unify(s, env, KnowledgeItem("p", Const("a1"), Const("P")))
    assert isinstance(r, Quarantined)
    assert not r.state.item("p").active
    # the refutation mentions the quarantined item itself
    view = view_context(env.ctx, r.state).define(Decl("p", Const("P")))
    check(view, r.refutation, Empty())


def test_unify_agrees_with_exhaustive_search():
    # random three-axiom bases; items name axioms, so the logical content is the axioms
    rng = random.Random(5)
    atoms = ("P", "Q", "R")
    pool = formulas(atoms, 1) + formulas(atoms, 3)
    outcomes = set()
    for _ in range(60):
        axioms = [rng.choice(pool) for _ in range(3)]
        env = _toy(axioms)
        k = rng.randrange(3)
        r = unify(initial_state(env), env, KnowledgeItem("n", Const(f"a{k}"), to_term(axioms[k])))
        expected = min_proof_size(atoms, axioms, BOT, UNIFY_BUDGET.depth) is not None
        assert isinstance(r, Quarantined if expected else Merged), axioms
        outcomes.add(expected)
    assert outcomes == {True, False}


def test_unify_without_fuel_is_unknown():
    env = load_scenario("pump")
    s = initial_state(env)
    r = unify(s, env, KnowledgeItem("reading_1", ValLit(25), VAL), Budget(fuel=0))
    assert isinstance(r, Unknown)


def test_unify_rejects_ill_typed_items():
    env = load_scenario("pump")
    with pytest.raises(IllTypedPayload):
        unify(initial_state(env), env, KnowledgeItem("x", ValLit(1), Const("PumpState")))


# --- invariants over random pump workloads ---------------------------------------------


def _active_items_check(env, state):
    view = view_context(env.ctx, state)
    for it in state.active():
        sort_of(view, it.type)
        check(view, it.term, it.type)


@given(st.lists(st.tuples(st.integers(0, 200), st.sampled_from(["P1", "P1", "P2"])), max_size=8))
@settings(max_examples=25)
def test_transition_invariants(readings):
    env = load_scenario("pump")
    s = initial_state(env)
    for kpa, pump in readings:
        _, e = _pump(kpa, pump)
        s = schedule(s, env, e)
    prev = None
    while True:
        before = s
        r = kstep(s, env)
        if isinstance(r, Quiescent):
            break
        if isinstance(r, Rejected):
            assert verify_id(before, r.state) is Equality.EQUAL
            s = drop_head(r.state)
            continue
        rec = r.record
        assert rec.clock_after == rec.clock_before + 1
        assert rec.digest_before == state_hash(before) and rec.digest_after == state_hash(r.state)
        assert rec.chain_hash == rec.compute_hash()
        if prev is not None:
            assert rec.prev_hash == prev.chain_hash
        prev = rec
        s = r.state
        _active_items_check(env, s)
        facts = [(it.id, it.type) for it in s.active()]
        assert not isinstance(search_proof(view_context(env.ctx, s), facts, Empty(), Budget(depth=4)), Found)


def test_determinism_of_a_run():
    env = load_scenario("pump")
    digests = set()
    for _ in range(3):
        s = initial_state(env)
        for kpa in (50, 120, 60, 10, 100):
            s = schedule(s, env, _pump(kpa)[1])
        final, results = run_to_quiescence(s, env)
        digests.add((state_hash(final), tuple(type(r).__name__ for r in results)))
    assert len(digests) == 1
