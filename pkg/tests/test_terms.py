import random
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles.named import _db_free, reference_instantiate
from strategies import raw_terms, rename_binders
from typedkb.terms import (
    PROP,
    VAL,
    App,
    Const,
    Context,
    Decl,
    Def,
    Lam,
    Pair,
    Refl,
    Sigma,
    ValLit,
    Var,
    alpha_equal,
    free_vars,
    from_data,
    instantiate,
    shift,
    size,
    substitute,
    term_hash,
    to_data,
)


def test_substitute_examples():
    assert substitute(Var(0), ValLit(25)) == ValLit(25)
    assert substitute(ValLit(7), ValLit(25)) == ValLit(7)
    ident = Lam(None, Var(0))
    assert substitute(App(Var(0), Var(0)), ident) == App(ident, ident)


def test_substitute_under_binder_shifts_the_replacement():
    # (\y. x y)[x := Var 3] keeps Var 3 pointing outside: it becomes Var 4 under y
    body = Lam(None, App(Var(1), Var(0)), "y")
    assert instantiate(body, Var(3)) == Lam(None, App(Var(4), Var(0)), "y")
    # variables above the removed binder move down by one
    assert instantiate(Var(2), ValLit(1)) == Var(1)


@given(raw_terms(), raw_terms(depth=2))
@settings(max_examples=400)
def test_instantiate_matches_named_substitution(body, u):
    width = 3
    # the body has one more variable in scope than the replacement
    u = _clip(u, width)
    body = _clip(body, width + 1)
    assert instantiate(body, u) == reference_instantiate(body, u, width)


def _clip(t, width):
    """Force every free index below ``width`` by taking it modulo."""
    from typedkb.terms import map_children

    def go(t, depth):
        if isinstance(t, Var):
            if t.index >= depth:
                return Var(depth + (t.index - depth) % width)
            return t
        return map_children(t, lambda c, nb: go(c, depth + nb))

    return go(t, 0)


def test_alpha_equal_examples():
    assert alpha_equal(Lam(None, Var(0), "x"), Lam(None, Var(0), "y"))
    assert not alpha_equal(Lam(None, Var(0), "x"), Lam(None, ValLit(1), "x"))
    assert alpha_equal(Pair(ValLit(25), Refl()), Pair(ValLit(25), Refl()))


@given(raw_terms(), st.randoms(use_true_random=False))
def test_renaming_binders_keeps_equality_and_hash(t, rng):
    r = rename_binders(t, rng)
    assert r == t and hash(r) == hash(t)
    assert term_hash(r) == term_hash(t)


@given(raw_terms(), raw_terms(), raw_terms())
def test_alpha_is_an_equivalence(a, b, c):
    assert alpha_equal(a, a)
    assert alpha_equal(a, b) == alpha_equal(b, a)
    if alpha_equal(a, b) and alpha_equal(b, c):
        assert alpha_equal(a, c)
    if term_hash(a) == term_hash(b):
        assert alpha_equal(a, b)


def test_free_vars_examples():
    assert free_vars(Var(0)) == {0}
    assert free_vars(Lam(None, Var(0))) == frozenset()
    assert free_vars(App(Var(2), Lam(None, Var(0)))) == {2}


@given(raw_terms())
def test_free_vars_matches_independent_traversal(t):
    assert set(free_vars(t)) == _db_free(t)


@given(raw_terms(), st.integers(0, 4), st.integers(0, 3))
def test_shift_round_trip(t, d, cutoff):
    assert shift(shift(t, d, cutoff), -d, cutoff) == t


@given(raw_terms())
def test_data_round_trip_keeps_names(t):
    back = from_data(to_data(t))
    assert back == t
    assert to_data(back) == to_data(t)  # names survive too


def test_hash_examples():
    assert term_hash(Lam(None, Var(0), "x")) == term_hash(Lam(None, Var(0), "y"))
    assert term_hash(ValLit(25)) != term_hash(ValLit(26))


def test_hash_is_stable_across_processes():
    code = (
        "from typedkb.terms import *;"
        "print(term_hash(Sigma(VAL, App(Const('is_T'), Var(0)), 'v')))"
    )
    runs = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)}
    assert runs == {term_hash(Sigma(VAL, App(Const("is_T"), Var(0)), "v")) + "\n"}


def test_size_counts_every_node():
    assert size(ValLit(3)) == 1
    assert size(Lam(VAL, Var(0))) == 3
    assert size(App(Lam(None, Var(0)), ValLit(1))) == 4


def test_negative_shift_refuses_to_capture():
    with pytest.raises(ValueError):
        shift(Var(0), -1)


def test_context_scoping():
    ctx = Context().define(Decl("is_T", Sigma(VAL, PROP)))
    ctx = ctx.define(Def("five", ValLit(5), VAL)).extend(Decl("x", VAL))
    assert ctx.has_name("five") and not ctx.has_name("x")
    assert ctx.var_entry(0).type == VAL
    # the global two entries down is reachable as Var(1) as well, with its terms shifted
    assert ctx.var_entry(1).value == ValLit(5)
    assert ctx.const_entry("five").value == ValLit(5)
    assert ctx.well_scoped(App(Const("five"), Var(2)))
    assert not ctx.well_scoped(Var(3))
    assert not ctx.well_scoped(Const("six"))
    with pytest.raises(ValueError):
        ctx.define(Decl("five", VAL))


def test_opaque_hides_only_the_named_definitions():
    ctx = Context().define(Def("a", ValLit(1), VAL)).define(Def("b", ValLit(2), VAL))
    o = ctx.opaque(["a"])
    assert isinstance(o.const_entry("a"), Decl)
    assert isinstance(o.const_entry("b"), Def)


def test_generated_names_do_not_matter_for_hash():
    rng = random.Random(3)
    t = Lam(VAL, Pair(Var(0), Lam(None, App(Var(1), Var(0)), "q")), "p")
    assert {term_hash(rename_binders(t, rng)) for _ in range(10)} == {term_hash(t)}
