"""Generators for the property tests.

``TypedGen`` builds closed well-typed terms over a small fixed context,
type first: pick a type, then a term of that type, sprinkling in every
kind of redex the reducer knows (beta, split, case, J, let, delta) so that
normalization has real work to do. All types are closed, so local
variables never need shifting.

The terms are core terms in the annotated style: every lambda carries its
domain and every injection the other summand, and ``refl`` only occurs as
the identity proof handed to J. Unannotated forms are a convenience of
checking mode; substituting one into a position that must infer (say
``f`` in ``(case s of inl x => \\y. x | inr z => ...) 3``) gives a term
the checker cannot type, so they are kept out of the reduction tests.
"""
from __future__ import annotations

import dataclasses
import random
from typing import Optional

from hypothesis import strategies as st

from typedkb.terms import (
    ID,
    VAL,
    App,
    Case,
    Const,
    Context,
    DataLevel,
    Decl,
    Def,
    IdLit,
    IdType,
    Inl,
    Inr,
    J,
    Lam,
    Let,
    Pair,
    PredTag,
    PrimPred,
    Pi,
    PrimProof,
    Refl,
    Sigma,
    SortTerm,
    Split,
    Sum,
    Term,
    ValLit,
    Var,
    arrow,
    product,
)
from typedkb.typechecker import TypeCheckError, check, sort_of

POS = Sigma(VAL, PrimPred(PredTag.LE_VAL, (ValLit(1), Var(0))), "v")


def base_context() -> Context:
    ctx = Context()
    ctx = ctx.define(Def("five", ValLit(5), VAL))
    ctx = ctx.define(Def("idv", Lam(VAL, Var(0), "n"), arrow(VAL, VAL)))
    ctx = ctx.define(Def("Pos", POS, SortTerm(DataLevel(1))))
    one = Pair(ValLit(1), PrimProof(PredTag.LE_VAL, (ValLit(1), ValLit(1))))
    ctx = ctx.define(Def("one_pos", one, Const("Pos")))
    ctx = ctx.define(Decl("site", ID))
    return ctx


CTX = base_context()
GLOBALS = [(Const("five"), VAL), (Const("idv"), arrow(VAL, VAL)),
           (Const("one_pos"), Const("Pos")), (Const("site"), ID)]
NAMES = ["x", "y", "p", "q"]


def _le(a: int, b: int) -> Term:
    return PrimPred(PredTag.LE_VAL, (ValLit(a), ValLit(b)))


class TypedGen:
    def __init__(self, rng: random.Random, depth: int = 3):
        self.rng = rng
        self.depth = depth

    # types

    def base_type(self) -> Term:
        r = self.rng
        a = r.randint(0, 9)
        return r.choice([
            VAL, VAL, ID, Const("Pos"), POS,
            _le(a, a + r.randint(0, 3)),
        ])

    def type(self, d: int = 2) -> Term:
        r = self.rng
        for _ in range(20):
            if d <= 0 or r.random() < 0.45:
                return self.base_type()
            a, b = self.type(d - 1), self.type(d - 1)
            ty = r.choice([arrow, product, Sum])(a, b)
            try:
                sort_of(CTX, ty)
                return ty
            except TypeCheckError:
                continue
        return self.base_type()

    def _wf(self, ty: Term) -> bool:
        try:
            sort_of(CTX, ty)
            return True
        except TypeCheckError:
            return False

    # terms

    def closed_val(self) -> Term:
        r = self.rng
        k = r.randint(1, 9)
        return r.choice([ValLit(k), App(Const("idv"), ValLit(k)), Const("five"),
                         App(Lam(VAL, Var(0), "n"), ValLit(k))])

    def intro(self, ty: Term, env: tuple, d: int) -> Term:
        r = self.rng
        if ty == VAL:
            return ValLit(r.randint(0, 9))
        if ty == ID:
            return IdLit(r.choice(["M1", "M2", "B7"]))
        if isinstance(ty, PrimPred):
            return PrimProof(ty.tag, ty.args)
        if isinstance(ty, IdType):
            return Refl()
        if ty == POS or ty == Const("Pos"):
            v = self.closed_val()
            return Pair(v, PrimProof(PredTag.LE_VAL, (ValLit(1), v)))
        if isinstance(ty, Sigma):  # non-dependent product
            return Pair(self.term(ty.fst, env, d - 1), self.term(ty.snd, env, d - 1))
        if isinstance(ty, Sum):
            if r.random() < 0.5:
                return Inl(self.term(ty.left, env, d - 1), ty.right)
            return Inr(self.term(ty.right, env, d - 1), ty.left)
        # arrow(A, B) with B closed
        dom, cod = ty.dom, ty.cod
        body = self.term(cod, env + (dom,), d - 1)
        return Lam(dom, body, r.choice(NAMES))

    @staticmethod
    def ann(t: Term, ty: Term) -> Term:
        """An inferable term of type ``ty``: (\\(z : ty). z) t."""
        return App(Lam(ty, Var(0), "z"), t)

    def term(self, ty: Term, env: tuple = (), d: Optional[int] = None) -> Term:
        r = self.rng
        d = self.depth if d is None else d
        options = ["intro"]
        locals_ = [i for i in range(len(env)) if env[-1 - i] == ty]
        funs = [i for i in range(len(env)) if isinstance(env[-1 - i], Pi)
                and env[-1 - i].cod == ty]
        if locals_:
            options += ["var"] * 2
        if any(g_ty == ty for _, g_ty in GLOBALS):
            options.append("global")
        if d > 0:
            options += ["beta", "let", "split", "case", "j", "proj"]
            if funs:
                options.append("apply")
        choice = r.choice(options)
        if choice == "var":
            return Var(r.choice(locals_))
        if choice == "global":
            return r.choice([g for g, g_ty in GLOBALS if g_ty == ty])
        if choice == "intro":
            return self.intro(ty, env, d)
        if choice == "apply":
            i = r.choice(funs)
            return App(Var(i), self.term(env[-1 - i].dom, env, d - 1))
        a = self.type(1)
        if choice == "beta":
            # the redex infers its body's type, which must be ty exactly
            body = self.ann(self.term(ty, env + (a,), d - 1), ty)
            return App(Lam(a, body, r.choice(NAMES)), self.term(a, env, d - 1))
        if choice == "let":
            return Let(self.term(a, env, d - 1), a, self.term(ty, env + (a,), d - 1), r.choice(NAMES))
        if choice == "j":
            n = ValLit(r.randint(0, 9))
            motive = Lam(VAL, ty, "k")
            eq = self.ann(Refl(), IdType(VAL, n, n))
            return J(motive, self.term(ty, env, d - 1), eq)
        b = self.type(1)
        if choice == "split":
            pty = product(a, b)
            if not self._wf(pty):
                return self.intro(ty, env, d)
            scrut = self.ann(Pair(self.term(a, env, d - 1), self.term(b, env, d - 1)), pty)
            body = self.term(ty, env + (a, b), d - 1)
            return Split(scrut, body, ("u", "w"))
        if choice == "proj":
            pty = product(ty, b)
            if not self._wf(pty):
                return self.intro(ty, env, d)
            scrut = self.ann(Pair(self.term(ty, env, d - 1), self.term(b, env, d - 1)), pty)
            return Split(scrut, Var(1), ("u", "w"))
        # case
        sty = Sum(a, b)
        if not self._wf(sty):
            return self.intro(ty, env, d)
        inj = Inl(self.term(a, env, d - 1), b) if r.random() < 0.5 else Inr(self.term(b, env, d - 1), a)
        left = self.term(ty, env + (a,), d - 1)
        right = self.term(ty, env + (b,), d - 1)
        return Case(self.ann(inj, sty), left, right, ("l", "r"))

    def sample(self) -> tuple[Term, Term]:
        """A (term, type) pair that checks in CTX."""
        ty = self.type()
        t = self.term(ty)
        check(CTX, t, ty)
        return t, ty


def typed_sample(seed: int, depth: int = 3) -> tuple[Term, Term]:
    return TypedGen(random.Random(seed), depth).sample()


def typed_corpus(n: int, seed: int = 0, depth: int = 3) -> list:
    rng = random.Random(seed)
    return [TypedGen(random.Random(rng.getrandbits(32)), depth).sample() for _ in range(n)]


typed_terms = st.builds(lambda r: TypedGen(r).sample(), st.randoms(use_true_random=False))


# --- raw (possibly ill-typed) terms for syntactic properties -------------------------


def _raw(draw, depth: int, width: int) -> Term:
    leaves = [st.just(Refl()), st.builds(ValLit, st.integers(0, 50)), st.sampled_from([Const("five"), Const("idv")])]
    if width:
        leaves.append(st.builds(Var, st.integers(0, width + 1)))
    if depth <= 0:
        return draw(st.one_of(leaves))
    kind = draw(st.sampled_from(["leaf", "lam", "app", "pair", "split", "case", "let", "pi", "inl"]))
    sub = lambda w=width: _raw(draw, depth - 1, w)  # noqa: E731
    name = draw(st.sampled_from(NAMES))
    if kind == "leaf":
        return draw(st.one_of(leaves))
    if kind == "lam":
        return Lam(sub() if draw(st.booleans()) else None, sub(width + 1), name)
    if kind == "app":
        return App(sub(), sub())
    if kind == "pair":
        return Pair(sub(), sub())
    if kind == "split":
        return Split(sub(), sub(width + 2), (name, "w"))
    if kind == "case":
        return Case(sub(), sub(width + 1), sub(width + 1), (name, "w"))
    if kind == "let":
        return Let(sub(), sub(), sub(width + 1), name)
    if kind == "pi":
        return Sigma(sub(), sub(width + 1), name)
    return Inl(sub(), sub() if draw(st.booleans()) else None)


@st.composite
def raw_terms(draw, depth: int = 4, width: int = 3):
    """Arbitrary scoped-or-not terms; free indices go up to ``width + 1``."""
    return _raw(draw, depth, width)


def rename_binders(t: Term, rng: random.Random) -> Term:
    """Same term with every binder name replaced at random."""
    changes = {}
    for f in dataclasses.fields(t):
        v = getattr(t, f.name)
        if f.name == "name" and isinstance(t, (Lam, Pi, Sigma, Let)):
            changes["name"] = rng.choice(NAMES + ["_", "zz"])
        elif f.name == "names":
            changes["names"] = tuple(rng.choice(NAMES) for _ in v)
        elif isinstance(v, Term):
            changes[f.name] = rename_binders(v, rng)
        elif isinstance(v, tuple) and v and all(isinstance(x, Term) for x in v):
            changes[f.name] = tuple(rename_binders(x, rng) for x in v)
    return dataclasses.replace(t, **changes) if changes else t
