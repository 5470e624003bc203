"""Named-variable terms with textbook capture-avoiding substitution.

The package works on de Bruijn indices; this module converts such terms to
explicit names, substitutes by renaming bound variables away from the free
variables of the replacement, and converts back. Binder tables are written
out here instead of borrowed from the package.
"""
from __future__ import annotations

import dataclasses
import itertools

from typedkb import terms as T

# field name -> how many variables the field's subterm binds
BINDS = {
    T.Lam: {"body": 1},
    T.Pi: {"cod": 1},
    T.Sigma: {"snd": 1},
    T.Let: {"body": 1},
    T.Split: {"body": 2},
    T.Case: {"left": 1, "right": 1},
}

# the binder names stored on the node, per bound field
NAME_SLOTS = {
    T.Lam: {"body": ("name",)},
    T.Pi: {"cod": ("name",)},
    T.Sigma: {"snd": ("name",)},
    T.Let: {"body": ("name",)},
    T.Split: {"body": ("names", 0, 1)},
    T.Case: {"left": ("names", 0), "right": ("names", 1)},
}

# names deliberately overlap the free names so substitution must rename
POOL = ["z", "f0", "f1", "f2", "w"]


def _fields(t):
    for f in dataclasses.fields(t):
        if f.name in ("name", "names") and type(t) in BINDS:
            continue  # binder names are not part of the term
        yield f.name, getattr(t, f.name)


def _db_free(t, depth=0) -> set:
    """Free de Bruijn indices, computed independently of the package."""
    if isinstance(t, T.Var):
        return {t.index - depth} if t.index >= depth else set()
    out = set()
    binds = BINDS.get(type(t), {})
    for name, v in _fields(t):
        nb = binds.get(name, 0)
        if isinstance(v, T.Term):
            out |= _db_free(v, depth + nb)
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, T.Term):
                    out |= _db_free(x, depth + nb)
    return out


# A named term is ("var", name) or ("node", cls, [(field, kind, payload)]).
# kind is "bound" (payload = (names, child)), "term", "terms" or "raw".


def to_named(t, scope: list):
    """``scope`` lists names innermost last; Var(i) is scope[-1 - i]."""
    if isinstance(t, T.Var):
        return ("var", scope[-1 - t.index])
    binds = BINDS.get(type(t), {})
    parts = []
    for name, v in _fields(t):
        nb = binds.get(name, 0)
        if nb:
            referenced = {scope[-1 - (i - nb)] for i in _db_free(v, 0) if i >= nb}
            chosen: list = []
            for _ in range(nb):
                pick = next(n for n in itertools.chain(POOL, (f"v{k}" for k in itertools.count()))
                            if n not in referenced and n not in chosen)
                chosen.append(pick)
            parts.append((name, "bound", (tuple(chosen), to_named(v, scope + chosen))))
        elif isinstance(v, T.Term):
            parts.append((name, "term", to_named(v, scope)))
        elif isinstance(v, tuple) and all(isinstance(x, T.Term) for x in v):
            parts.append((name, "terms", tuple(to_named(x, scope) for x in v)))
        else:
            parts.append((name, "raw", v))
    return ("node", type(t), parts)


def from_named(n, scope: list):
    if n[0] == "var":
        name = n[1]
        for i, s in enumerate(reversed(scope)):
            if s == name:
                return T.Var(i)
        raise KeyError(name)
    _, cls, parts = n
    kw = {}
    for name, kind, payload in parts:
        if kind == "bound":
            names, child = payload
            kw[name] = from_named(child, scope + list(names))
        elif kind == "term":
            kw[name] = from_named(payload, scope)
        elif kind == "terms":
            kw[name] = tuple(from_named(x, scope) for x in payload)
        else:
            kw[name] = payload
    return cls(**kw)


def free_names(n) -> set:
    if n[0] == "var":
        return {n[1]}
    out = set()
    for _, kind, payload in n[2]:
        if kind == "bound":
            names, child = payload
            out |= free_names(child) - set(names)
        elif kind == "term":
            out |= free_names(payload)
        elif kind == "terms":
            for x in payload:
                out |= free_names(x)
    return out


_fresh = itertools.count()


def subst(n, x: str, u):
    """n[u/x], renaming binders that would capture a free name of u."""
    if n[0] == "var":
        return u if n[1] == x else n
    _, cls, parts = n
    fu = free_names(u)
    out = []
    for name, kind, payload in parts:
        if kind == "bound":
            names, child = payload
            if x in names or x not in free_names(child):
                out.append((name, kind, payload))
                continue
            new_names = []
            for b in names:
                if b in fu:
                    fresh = f"r{next(_fresh)}"
                    child = subst(child, b, ("var", fresh))
                    b = fresh
                new_names.append(b)
            out.append((name, kind, (tuple(new_names), subst(child, x, u))))
        elif kind == "term":
            out.append((name, kind, subst(payload, x, u)))
        elif kind == "terms":
            out.append((name, kind, tuple(subst(p, x, u) for p in payload)))
        else:
            out.append((name, kind, payload))
    return ("node", cls, out)


def outer_scope(width: int) -> list:
    """Free names f0 (Var 0) .. f{width-1}, innermost last."""
    return [f"f{k}" for k in reversed(range(width))]


def reference_instantiate(body, u, width: int):
    """What ``instantiate(body, u)`` must return, computed with names.

    ``body`` sits under one binder called z; both terms may use the
    ``width`` outer variables.
    """
    outer = outer_scope(width)
    nb = to_named(body, outer + ["z"])
    nu = to_named(u, outer)
    return from_named(subst(nb, "z", nu), outer)
