"""Concrete syntax: lexer, parser and printer for terms and ``.kos`` modules.

Term syntax at a glance::

    \\x. t   \\(x : A). t       lambda
    f a b   f(a, b)            application
    (x : A) -> B   A -> B      dependent / plain function type
    (x : A) * B    A * B       dependent / plain pair type
    A + B                      sum type
    <a, b>   p.1   p.2         pair and projections
    split p as <x, y> in t
    case s of inl x => t | inr y => u
    let x : A = v in t
    Id(A, a, b)  refl  J(C, d, e)  absurd(e)  absurd[T](e)
    inl(v)  inl[B](v)  inr(v)  inr[A](v)
    LeVal(a, b) ... (primitive predicates)  prim LeVal(a, b)  refute LeVal(a, b)
    distinct(A, a, b)
    25   @07:55   @2023-10-10T10:00   @1500ms   @+300ms   "B2310"
    Prop  Type1  U0  Val  Time  ID  Empty  #3 (free de Bruijn index)
"""
from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .terms import (
    Absurd,
    App,
    BaseKind,
    BaseType,
    Case,
    Const,
    DataLevel,
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
    SortTerm,
    Split,
    Sum,
    Term,
    TimeKind,
    TimeLit,
    TypeLevel,
    ValLit,
    Var,
    consts,
    mentions,
    shift,
)


# --- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: Optional[Span] = None
    severity: str = "error"
    file: Optional[str] = None

    def render(self, filename: str = "<input>") -> str:
        filename = self.file or filename
        where = f"{filename}:{self.span}" if self.span else filename
        return f"{where}: {self.severity}: {self.message}"

    def to_json(self) -> dict:
        out = {"severity": self.severity, "message": self.message, "file": self.file}
        if self.span:
            out["line"], out["col"] = self.span.line, self.span.col
        return out


class ParseError(Exception):
    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(f"{span}: {message}" if span else message)
        self.message = message
        self.span = span

    @property
    def diagnostic(self) -> Diagnostic:
        return Diagnostic(self.message, self.span)


# --- lexer ----------------------------------------------------------------------

KEYWORDS = {
    "sort", "type", "axiom", "def", "fact", "event", "pre", "op", "post",
    "template", "watcher", "on", "args", "prove", "for", "when", "guard",
    "report", "from", "emit", "let", "in", "split", "as", "case", "of",
    "inl", "inr", "refl", "J", "absurd", "prim", "refute", "distinct", "Id",
    "add", "invalidate", "enqueue",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<time>@\+?[0-9][0-9:\-T.]*(?:ms)?)
  | (?P<number>0x[0-9A-Fa-f]+|[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<raw>\#[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|=>|[()<>,.:;*+\\={}\[\]|])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, number, string, time, raw, sym, eof
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.end_line, self.end_col)


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", Span(line, col, line, col + 1))
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        elif kind in ("ws", "comment"):
            col += len(s)
        else:
            if kind == "ident" and s in KEYWORDS:
                kind = "keyword"
            toks.append(Token(kind, s, line, col, line, col + len(s)))
            col += len(s)
        pos = m.end()
    toks.append(Token("eof", "", line, col, line, col))
    return toks


# --- literals -----------------------------------------------------------------

_DAY_MS = 86_400_000


def parse_time(text: str) -> TimeLit:
    """Parse the body of an ``@`` literal."""
    body = text[1:] if text.startswith("@") else text
    if body.startswith("+"):
        m = re.fullmatch(r"\+([0-9]+)ms", body)
        if not m:
            raise ValueError(f"bad duration literal {text!r}")
        return TimeLit(int(m.group(1)), TimeKind.DURATION)
    m = re.fullmatch(r"([0-9]+)ms", body)
    if m:
        return TimeLit(int(m.group(1)))
    m = re.fullmatch(r"([0-9]{1,2}):([0-9]{2})(?::([0-9]{2})(?:\.([0-9]{3}))?)?", body)
    if m:
        h, mi, s, ms = (int(g) if g else 0 for g in m.groups())
        if h > 23 or mi > 59 or s > 59:
            raise ValueError(f"bad time of day {text!r}")
        return TimeLit(((h * 60 + mi) * 60 + s) * 1000 + ms)
    m = re.fullmatch(r"([0-9]{4}-[0-9]{2}-[0-9]{2})T([0-9]{2}):([0-9]{2})(?::([0-9]{2})(?:\.([0-9]{3}))?)?", body)
    if m:
        date = _dt.date.fromisoformat(m.group(1))
        h, mi, s, ms = (int(g) if g else 0 for g in m.groups()[1:])
        dt = _dt.datetime(date.year, date.month, date.day, h, mi, s, tzinfo=_dt.timezone.utc)
        return TimeLit(int(dt.timestamp()) * 1000 + ms)
    raise ValueError(f"bad time literal {text!r}")


def _clock(ms: int) -> str:
    h, rem = divmod(ms, 3_600_000)
    mi, rem = divmod(rem, 60_000)
    s, milli = divmod(rem, 1000)
    out = f"{h:02d}:{mi:02d}"
    if s or milli:
        out += f":{s:02d}"
        if milli:
            out += f".{milli:03d}"
    return out


def format_time(t: TimeLit) -> str:
    if t.kind == TimeKind.DURATION:
        return f"@+{t.value}ms"
    if t.value < _DAY_MS:
        return "@" + _clock(t.value)
    dt = _dt.datetime.fromtimestamp(t.value // 1000, tz=_dt.timezone.utc)
    return "@" + dt.strftime("%Y-%m-%dT") + _clock((t.value % _DAY_MS))


def time_of_day(t: TimeLit) -> str:
    """``HH:MM`` (plus seconds when present) of a timestamp, for reports."""
    return _clock(t.value % _DAY_MS)


_SORT_RE = re.compile(r"(Type|U)([0-9]+)")
_BASES = {"Val": BaseKind.VAL, "Time": BaseKind.TIME, "ID": BaseKind.ID}
_PREDS = {t.value: t for t in PredTag}


# --- term parser ----------------------------------------------------------------


class Parser:
    def __init__(self, text: str, spans: Optional[dict] = None):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.locals: list[str] = []
        self.spans = spans if spans is not None else {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "keyword") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {self.tok.text or 'end of input'!r}", self.tok.span)
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise ParseError(f"expected a name, found {t.text or 'end of input'!r}", t.span)
        self.i += 1
        return t.text

    def _mark(self, term: Term, start: Token) -> Term:
        end = self.toks[self.i - 1]
        self.spans.setdefault(id(term), Span(start.line, start.col, end.end_line, end.end_col))
        return term

    def bind(self, *names: str):
        parser = self

        class _Scope:
            def __enter__(self):
                parser.locals.extend(names)

            def __exit__(self, *exc):
                del parser.locals[len(parser.locals) - len(names):]

        return _Scope()

    # grammar
    def expr(self) -> Term:
        start = self.tok
        if self.accept("\\"):
            binders = []
            while not self.at("."):
                if self.accept("("):
                    name = self.ident()
                    self.expect(":")
                    with self.bind(*[b for b, _ in binders]):
                        ann = self.expr()
                    self.expect(")")
                    binders.append((name, ann))
                else:
                    binders.append((self.ident(), None))
                if len(binders) > 64:
                    break
            if not binders:
                raise ParseError("lambda needs a binder", start.span)
            self.expect(".")
            with self.bind(*[b for b, _ in binders]):
                body = self.expr()
            for name, ann in reversed(binders):
                body = Lam(ann, body, name)
            return self._mark(body, start)
        if self.accept("let"):
            name = self.ident()
            self.expect(":")
            ty = self.expr()
            self.expect("=")
            value = self.expr()
            self.expect("in")
            with self.bind(name):
                body = self.expr()
            return self._mark(Let(value, ty, body, name), start)
        if self.accept("split"):
            scrut = self.expr()
            self.expect("as")
            self.expect("<")
            x = self.ident()
            self.expect(",")
            y = self.ident()
            self.expect(">")
            self.expect("in")
            with self.bind(x, y):
                body = self.expr()
            return self._mark(Split(scrut, body, (x, y)), start)
        if self.accept("case"):
            scrut = self.expr()
            self.expect("of")
            self.expect("inl")
            x = self.ident()
            self.expect("=>")
            with self.bind(x):
                left = self.expr()
            self.expect("|")
            self.expect("inr")
            y = self.ident()
            self.expect("=>")
            with self.bind(y):
                right = self.expr()
            return self._mark(Case(scrut, left, right, (x, y)), start)
        return self.arrow()

    def _binder_group(self) -> bool:
        return self.at("(") and self.peek().kind == "ident" and self.peek(2).text == ":" and self.peek(2).kind == "sym"

    def _closing_paren_follows(self, sym: str) -> bool:
        depth, k = 0, self.i
        while k < len(self.toks):
            t = self.toks[k]
            if t.kind == "sym" and t.text in "([<" and t.text not in ("<",):
                depth += 1
            elif t.kind == "sym" and t.text in ")]":
                depth -= 1
                if depth == 0:
                    nxt = self.toks[k + 1]
                    return nxt.kind == "sym" and nxt.text == sym
            elif t.kind == "eof":
                return False
            k += 1
        return False

    def arrow(self) -> Term:
        start = self.tok
        # "(x :" can only open a binder; an unclosed one is reported where it ends
        if self._binder_group() and not self._closing_paren_follows("*"):
            self.expect("(")
            name = self.ident()
            self.expect(":")
            dom = self.expr()
            self.expect(")")
            self.expect("->")
            with self.bind(name):
                cod = self.arrow()
            return self._mark(Pi(dom, cod, name), start)
        left = self.sum()
        if self.accept("->"):
            right = self.arrow()
            return self._mark(Pi(left, shift(right, 1), "_"), start)
        return left

    def sum(self) -> Term:
        start = self.tok
        left = self.prod()
        while self.accept("+"):
            left = self._mark(Sum(left, self.prod()), start)
        return left

    def prod(self) -> Term:
        start = self.tok
        if self._binder_group() and self._closing_paren_follows("*"):
            self.expect("(")
            name = self.ident()
            self.expect(":")
            fst = self.expr()
            self.expect(")")
            self.expect("*")
            with self.bind(name):
                snd = self.prod()
            return self._mark(Sigma(fst, snd, name), start)
        left = self.app()
        if self.accept("*"):
            right = self.prod()
            return self._mark(Sigma(left, shift(right, 1), "_"), start)
        return left

    def _starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("ident", "number", "string", "time", "raw"):
            return True
        if t.kind == "sym":
            return t.text in ("(", "<")
        return t.kind == "keyword" and t.text in (
            "refl", "inl", "inr", "J", "absurd", "prim", "refute", "distinct", "Id",
        )

    def app(self) -> Term:
        start = self.tok
        head = self.postfix()
        while self._starts_atom():
            if self.at("(") and not self._binder_group():
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                for a in args:
                    head = App(head, a)
                head = self._postfix_tail(self._mark(head, start), start)
            else:
                head = self._mark(App(head, self.postfix()), start)
        return head

    def postfix(self) -> Term:
        start = self.tok
        return self._postfix_tail(self.atom(), start)

    def _postfix_tail(self, t: Term, start: Token) -> Term:
        while self.at(".") and self.peek().kind == "number" and self.peek().text in ("1", "2"):
            self.i += 1
            which = self.tok.text
            self.i += 1
            t = self._mark(Split(t, Var(1 if which == "1" else 0)), start)
        return t

    def _arglist(self) -> list[Term]:
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        return args

    def _annotation(self) -> Optional[Term]:
        if self.accept("["):
            ann = self.expr()
            self.expect("]")
            return ann
        return None

    def _pred(self) -> tuple[PredTag, tuple]:
        t = self.tok
        if t.kind != "ident" or t.text not in _PREDS:
            raise ParseError("expected a primitive predicate", t.span)
        self.i += 1
        return _PREDS[t.text], tuple(self._arglist())

    def atom(self) -> Term:
        t = self.tok
        start = t
        if t.kind == "number":
            self.i += 1
            return self._mark(ValLit(int(t.text, 0)), start)
        if t.kind == "string":
            self.i += 1
            return self._mark(IdLit(json.loads(t.text)), start)
        if t.kind == "time":
            self.i += 1
            try:
                return self._mark(parse_time(t.text), start)
            except ValueError as e:
                raise ParseError(str(e), t.span) from None
        if t.kind == "raw":
            self.i += 1
            return self._mark(Var(int(t.text[1:]) + len(self.locals)), start)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if self.accept("<"):
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(">")
            return self._mark(Pair(a, b), start)
        if t.kind == "keyword":
            self.i += 1
            kw = t.text
            if kw == "refl":
                return self._mark(Refl(), start)
            if kw in ("inl", "inr"):
                ann = self._annotation()
                self.expect("(")
                v = self.expr()
                self.expect(")")
                return self._mark((Inl if kw == "inl" else Inr)(v, ann), start)
            if kw == "absurd":
                ann = self._annotation()
                self.expect("(")
                v = self.expr()
                self.expect(")")
                return self._mark(Absurd(v, ann), start)
            if kw in ("J", "Id", "distinct"):
                args = self._arglist()
                if len(args) != 3:
                    raise ParseError(f"{kw} takes three arguments", t.span)
                cls = {"J": J, "Id": IdType, "distinct": Distinct}[kw]
                return self._mark(cls(*args), start)
            if kw in ("prim", "refute"):
                tag, args = self._pred()
                return self._mark((PrimProof if kw == "prim" else PrimRefute)(tag, args), start)
            raise ParseError(f"unexpected keyword {kw!r}", t.span)
        if t.kind == "ident":
            self.i += 1
            name = t.text
            if name in self.locals:
                idx = len(self.locals) - 1 - self.locals[::-1].index(name)
                return self._mark(Var(len(self.locals) - 1 - idx), start)
            if name == "Prop":
                return self._mark(SortTerm(Prop()), start)
            if name == "Empty":
                return self._mark(Empty(), start)
            if name in _BASES:
                return self._mark(BaseType(_BASES[name]), start)
            m = _SORT_RE.fullmatch(name)
            if m:
                level = int(m.group(2))
                try:
                    s = TypeLevel(level) if m.group(1) == "Type" else DataLevel(level)
                except ValueError as e:
                    raise ParseError(str(e), t.span) from None
                return self._mark(SortTerm(s), start)
            if name in _PREDS:
                self.i -= 1
                tag, args = self._pred()
                return self._mark(PrimPred(tag, args), start)
            return self._mark(Const(name), start)
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.span)

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self.tok.text!r} after the term", self.tok.span)


def parse_term(text: str, locals_: tuple = ()) -> Term:
    """Parse one term. ``locals_`` names enclosing binders, outermost first."""
    p = Parser(text)
    p.locals = list(locals_)
    t = p.expr()
    p.done()
    return t


# --- printer ----------------------------------------------------------------------

_RESERVED = KEYWORDS | {"Prop", "Empty", "Val", "Time", "ID"} | set(_PREDS)


def _fresh(hint: str, taken: set) -> str:
    base = hint if hint and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", hint) else "x"
    if base == "_":
        base = "x"
    if base in _RESERVED or _SORT_RE.fullmatch(base):
        base = base + "_"
    name, k = base, 0
    while name in taken:
        k += 1
        name = f"{base}{k}"
    return name


class _Printer:
    def __init__(self, globals_: set):
        self.globals = globals_

    def name_for(self, hint: str, scope: list, body: Term, nbody: int = 0) -> str:
        return _fresh(hint, set(scope) | self.globals)

    def p(self, t: Term, scope: list, level: int) -> str:
        s, own = self.node(t, scope)
        return f"({s})" if own < level else s

    def node(self, t: Term, scope: list) -> tuple[str, int]:
        match t:
            case Var(i):
                if i < len(scope):
                    return scope[len(scope) - 1 - i], 5
                return f"#{i - len(scope)}", 5
            case Const(name):
                return name, 5
            case ValLit(n):
                return str(n), 5
            case TimeLit():
                return format_time(t), 5
            case IdLit(s):
                return json.dumps(s), 5
            case SortTerm(s):
                return str(s), 5
            case BaseType(k):
                return k.value, 5
            case Empty():
                return "Empty", 5
            case Refl():
                return "refl", 5
            case Lam(dom, body, name):
                n = self.name_for(name if mentions(body, 0) else "_", scope, body)
                if not mentions(body, 0) and n != "_" and "_" not in scope:
                    n = "_" if "_" not in self.globals else n
                binder = f"({n} : {self.p(dom, scope, 0)})" if dom is not None else n
                return f"\\{binder}. {self.p(body, scope + [n], 0)}", 0
            case Let(value, ty, body, name):
                n = self.name_for(name, scope, body)
                return (
                    f"let {n} : {self.p(ty, scope, 0)} = {self.p(value, scope, 0)} in "
                    f"{self.p(body, scope + [n], 0)}",
                    0,
                )
            case Split(scrut, Var(1)):
                return f"{self.p(scrut, scope, 4)}.1", 4
            case Split(scrut, Var(0)):
                return f"{self.p(scrut, scope, 4)}.2", 4
            case Split(scrut, body, names):
                x = self.name_for(names[0], scope, body)
                y = self.name_for(names[1], scope + [x], body)
                return f"split {self.p(scrut, scope, 0)} as <{x}, {y}> in {self.p(body, scope + [x, y], 0)}", 0
            case Case(scrut, left, right, names):
                x = self.name_for(names[0], scope, left)
                y = self.name_for(names[1], scope, right)
                return (
                    f"case {self.p(scrut, scope, 0)} of inl {x} => {self.p(left, scope + [x], 0)}"
                    f" | inr {y} => {self.p(right, scope + [y], 0)}",
                    0,
                )
            case Pi(dom, cod, name):
                if not mentions(cod, 0):
                    return f"{self.p(dom, scope, 1)} -> {self.p(shift(cod, -1), scope, 0)}", 0
                n = self.name_for(name, scope, cod)
                return f"({n} : {self.p(dom, scope, 0)}) -> {self.p(cod, scope + [n], 0)}", 0
            case Sum(left, right):
                return f"{self.p(left, scope, 1)} + {self.p(right, scope, 2)}", 1
            case Sigma(fst, snd, name):
                if not mentions(snd, 0):
                    return f"{self.p(fst, scope, 3)} * {self.p(shift(snd, -1), scope, 2)}", 2
                n = self.name_for(name, scope, snd)
                return f"({n} : {self.p(fst, scope, 0)}) * {self.p(snd, scope + [n], 2)}", 2
            case App():
                args = []
                head = t
                while isinstance(head, App):
                    args.append(head.arg)
                    head = head.fn
                args.reverse()
                inner = ", ".join(self.p(a, scope, 0) for a in args)
                return f"{self.p(head, scope, 4)}({inner})", 4
            case Pair(a, b):
                return f"<{self.p(a, scope, 0)}, {self.p(b, scope, 0)}>", 5
            case Inl(v, other) | Inr(v, other):
                kw = "inl" if isinstance(t, Inl) else "inr"
                ann = f"[{self.p(other, scope, 0)}]" if other is not None else ""
                return f"{kw}{ann}({self.p(v, scope, 0)})", 5
            case Absurd(proof, target):
                ann = f"[{self.p(target, scope, 0)}]" if target is not None else ""
                return f"absurd{ann}({self.p(proof, scope, 0)})", 5
            case J(c, d, e):
                return f"J({self.p(c, scope, 0)}, {self.p(d, scope, 0)}, {self.p(e, scope, 0)})", 5
            case IdType(a, x, y):
                return f"Id({self.p(a, scope, 0)}, {self.p(x, scope, 0)}, {self.p(y, scope, 0)})", 5
            case Distinct(a, x, y):
                return f"distinct({self.p(a, scope, 0)}, {self.p(x, scope, 0)}, {self.p(y, scope, 0)})", 5
            case PrimPred(tag, args) | PrimProof(tag, args) | PrimRefute(tag, args):
                prefix = {PrimPred: "", PrimProof: "prim ", PrimRefute: "refute "}[type(t)]
                inner = ", ".join(self.p(a, scope, 0) for a in args)
                return f"{prefix}{tag.value}({inner})", (5 if not prefix else 4)
        raise TypeError(f"cannot print {t!r}")


def print_term(t: Term, locals_: tuple = ()) -> str:
    """Render ``t``; ``parse_term(print_term(t))`` gives back an alpha-equal term."""
    return _Printer(consts(t)).p(t, list(locals_), 0)


# --- module declarations --------------------------------------------------------------


@dataclass
class Decl:
    kind: str
    name: str
    span: Span
    type: Optional[Term] = None
    value: Optional[Term] = None


@dataclass
class OpEffect:
    kind: str  # add | invalidate | enqueue
    target: object  # id template: list of str | Term parts; or event name
    type: Optional[Term] = None
    value: Optional[Term] = None
    span: Optional[Span] = None


@dataclass
class EventDecl:
    name: str
    arg_name: str
    args_type: Term
    pre: Optional[Term]
    post: Optional[Term]
    ops: list
    span: Span


@dataclass
class TemplateDecl:
    name: str
    kind: object  # int or str
    event: str
    args: str
    prove: str
    span: Span


@dataclass
class WatcherDecl:
    name: str
    binders: list  # (name, type term) in binding order
    when: Optional[Term]
    guard: Optional[Term]
    report: Optional[tuple]  # (name, report type, subject binder index)
    emit_event: str
    emit_args: Term
    span: Span


@dataclass
class Module:
    decls: list = field(default_factory=list)
    events: list = field(default_factory=list)
    templates: list = field(default_factory=list)
    watchers: list = field(default_factory=list)
    spans: dict = field(default_factory=dict)


_HOLE_RE = re.compile(r"\$\{([^}]*)\}")


def split_holes(text: str) -> list:
    """Split a template string into literal text and ``${...}`` hole sources."""
    parts: list = []
    pos = 0
    for m in _HOLE_RE.finditer(text):
        if m.start() > pos:
            parts.append(text[pos:m.start()])
        parts.append(("hole", m.group(1).strip()))
        pos = m.end()
    if pos < len(text):
        parts.append(text[pos:])
    return parts


class ModuleParser(Parser):
    def module(self) -> Module:
        mod = Module(spans=self.spans)
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept("sort"):
                name = self.ident()
                value = None
                if self.accept("="):
                    value = self.expr()
                mod.decls.append(Decl("sort", name, self._span(start), value=value))
            elif self.accept("type"):
                name = self.ident()
                self.expect("=")
                mod.decls.append(Decl("type", name, self._span(start), value=self.expr()))
            elif self.accept("axiom"):
                name = self.ident()
                self.expect(":")
                mod.decls.append(Decl("axiom", name, self._span(start), type=self.expr()))
            elif self.at("def") or self.at("fact"):
                kind = self.tok.text
                self.i += 1
                name = self.ident()
                ty = None
                if self.accept(":"):
                    ty = self.expr()
                elif kind == "fact":
                    raise ParseError("a fact needs a type", self.tok.span)
                self.expect("=")
                value = self.expr()
                mod.decls.append(Decl(kind, name, self._span(start), type=ty, value=value))
            elif self.accept("event"):
                mod.events.append(self._event(start))
            elif self.accept("template"):
                mod.templates.append(self._template(start))
            elif self.accept("watcher"):
                mod.watchers.append(self._watcher(start))
            else:
                raise ParseError(f"expected a declaration, found {self.tok.text!r}", self.tok.span)
            self.accept(";")
        return mod

    def _span(self, start: Token) -> Span:
        end = self.toks[self.i - 1]
        return Span(start.line, start.col, end.end_line, end.end_col)

    def _id_template(self) -> list:
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return [t.text]
        if t.kind == "string":
            self.i += 1
            parts = []
            for part in split_holes(json.loads(t.text)):
                if isinstance(part, tuple):
                    try:
                        parts.append(parse_term(part[1], tuple(self.locals)))
                    except ParseError as e:
                        raise ParseError(f"in hole: {e.message}", t.span) from None
                else:
                    parts.append(part)
            return parts
        raise ParseError("expected an item name or a quoted name template", t.span)

    def _event(self, start: Token) -> EventDecl:
        name = self.ident()
        self.expect("(")
        arg = self.ident()
        self.expect(":")
        args_type = self.expr()
        self.expect(")")
        self.expect("{")
        pre = post = None
        ops: list = []
        with self.bind(arg):
            while not self.accept("}"):
                if self.accept("pre"):
                    pre = self.expr()
                elif self.accept("post"):
                    post = self.expr()
                elif self.accept("op"):
                    self.expect("{")
                    while not self.accept("}"):
                        ostart = self.tok
                        if self.accept("add"):
                            target = self._id_template()
                            self.expect(":")
                            ty = self.expr()
                            self.expect("=")
                            value = self.expr()
                            ops.append(OpEffect("add", target, ty, value, self._span(ostart)))
                        elif self.accept("invalidate"):
                            ops.append(OpEffect("invalidate", self._id_template(), span=self._span(ostart)))
                        elif self.accept("enqueue"):
                            ev = self.ident()
                            self.expect("(")
                            value = self.expr()
                            self.expect(")")
                            ops.append(OpEffect("enqueue", ev, value=value, span=self._span(ostart)))
                        else:
                            raise ParseError(f"expected add, invalidate or enqueue, found {self.tok.text!r}", self.tok.span)
                        self.accept(";")
                else:
                    raise ParseError(f"expected pre, op or post, found {self.tok.text!r}", self.tok.span)
                self.accept(";")
        return EventDecl(name, arg, args_type, pre, post, ops, self._span(start))

    def _template(self, start: Token) -> TemplateDecl:
        name = self.ident()
        self.expect("on")
        t = self.tok
        if t.kind == "number":
            kind: object = int(t.text, 0)
        elif t.kind == "string":
            kind = json.loads(t.text)
        else:
            raise ParseError("template kind must be a number or a string", t.span)
        self.i += 1
        self.expect("->")
        event = self.ident()
        self.expect("{")
        args, prove = None, "elaborator"
        while not self.accept("}"):
            if self.accept("args"):
                t = self.tok
                if t.kind != "string":
                    raise ParseError("template args must be a quoted term template", t.span)
                self.i += 1
                args = json.loads(t.text)
            elif self.accept("prove"):
                prove = self.ident()
                if prove not in ("kernel", "elaborator"):
                    raise ParseError("prove is 'kernel' or 'elaborator'", self.toks[self.i - 1].span)
            else:
                raise ParseError(f"expected args or prove, found {self.tok.text!r}", self.tok.span)
            self.accept(";")
        if args is None:
            raise ParseError("template needs args", start.span)
        return TemplateDecl(name, kind, event, args, prove, self._span(start))

    def _watcher(self, start: Token) -> WatcherDecl:
        name = self.ident()
        self.expect("{")
        binders: list = []
        when = guard = report = None
        emit = None
        self.expect("for")
        while True:
            b = self.ident()
            self.expect(":")
            with self.bind(*[x for x, _ in binders]):
                ty = self.expr()
            binders.append((b, ty))
            if not self.accept(","):
                break
        self.accept(";")
        names = [b for b, _ in binders]
        # clauses come in a fixed order so every term has a known scope
        with self.bind(*names):
            if self.accept("when"):
                when = self.expr()
                self.accept(";")
            if self.accept("guard"):
                guard = self.expr()
                self.accept(";")
            if self.accept("report"):
                rname = self.ident()
                self.expect(":")
                rtype = self.expr()
                self.expect("from")
                subj = self.ident()
                if subj not in names:
                    raise ParseError(f"unknown binder {subj!r}", self.toks[self.i - 1].span)
                report = (rname, rtype, names.index(subj))
                self.accept(";")
        scope = names + ([report[0]] if report else [])
        with self.bind(*scope):
            if not self.accept("emit"):
                raise ParseError(
                    f"expected when, guard, report or emit (in that order), found {self.tok.text!r}",
                    self.tok.span,
                )
            ev = self.ident()
            self.expect("(")
            emit = (ev, self.expr())
            self.expect(")")
        self.accept(";")
        self.expect("}")
        return WatcherDecl(name, binders, when, guard, report, emit[0], emit[1], self._span(start))


def parse_module(text: str) -> Module:
    p = ModuleParser(text)
    return p.module()


def _print_id_template(parts, scope: tuple) -> str:
    if len(parts) == 1 and isinstance(parts[0], str) and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_']*", parts[0]) \
            and parts[0] not in KEYWORDS:
        return parts[0]
    text = "".join(p if isinstance(p, str) else "${" + print_term(p, scope) + "}" for p in parts)
    return json.dumps(text)


def print_module(mod: Module) -> str:
    """Source text for ``mod``; parsing it back gives the same declarations.

    Declarations come out grouped (plain declarations, then events,
    templates, watchers), which is also the order the loader checks them in.
    """
    out = []
    for d in mod.decls:
        if d.kind == "sort":
            out.append(f"sort {d.name}" + (f" = {print_term(d.value)}" if d.value is not None else ""))
        elif d.kind == "type":
            out.append(f"type {d.name} = {print_term(d.value)}")
        elif d.kind == "axiom":
            out.append(f"axiom {d.name} : {print_term(d.type)}")
        else:
            ty = f" : {print_term(d.type)}" if d.type is not None else ""
            out.append(f"{d.kind} {d.name}{ty} = {print_term(d.value)}")
    for ev in mod.events:
        scope = (ev.arg_name,)
        lines = [f"event {ev.name} ({ev.arg_name} : {print_term(ev.args_type)}) {{"]
        if ev.pre is not None:
            lines.append(f"  pre {print_term(ev.pre, scope)}")
        if ev.ops:
            lines.append("  op {")
            for op in ev.ops:
                if op.kind == "add":
                    lines.append(f"    add {_print_id_template(op.target, scope)} : "
                                 f"{print_term(op.type, scope)} = {print_term(op.value, scope)};")
                elif op.kind == "invalidate":
                    lines.append(f"    invalidate {_print_id_template(op.target, scope)};")
                else:
                    lines.append(f"    enqueue {op.target}({print_term(op.value, scope)});")
            lines.append("  }")
        if ev.post is not None:
            lines.append(f"  post {print_term(ev.post, scope)}")
        lines.append("}")
        out.append("\n".join(lines))
    for t in mod.templates:
        kind = f"0x{t.kind:X}" if isinstance(t.kind, int) else json.dumps(t.kind)
        out.append(f"template {t.name} on {kind} -> {t.event} {{\n  args {json.dumps(t.args)}\n"
                   f"  prove {t.prove}\n}}")
    for w in mod.watchers:
        names = tuple(b for b, _ in w.binders)
        binders = ", ".join(f"{b} : {print_term(ty, names[:k])}" for k, (b, ty) in enumerate(w.binders))
        lines = [f"watcher {w.name} {{", f"  for {binders}"]
        if w.when is not None:
            lines.append(f"  when {print_term(w.when, names)}")
        if w.guard is not None:
            lines.append(f"  guard {print_term(w.guard, names)}")
        scope = names
        if w.report is not None:
            rname, rtype, subj = w.report
            lines.append(f"  report {rname} : {print_term(rtype, names)} from {names[subj]}")
            scope = names + (rname,)
        lines.append(f"  emit {w.emit_event}({print_term(w.emit_args, scope)})")
        lines.append("}")
        out.append("\n".join(lines))
    return "\n\n".join(out) + ("\n" if out else "")


# --- signals ------------------------------------------------------------------------


class SignalError(ValueError):
    pass


_SIGNAL_FIELDS = {"seq", "kind", "payload", "wall_time_ms"}


def parse_signal(line: str):
    """Strict JSON decoding of one raw signal line."""
    from .runtime import RawSignal

    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise SignalError(f"malformed JSON: {e.msg} at column {e.colno}") from None
    if not isinstance(obj, dict):
        raise SignalError("a signal must be a JSON object")
    extra = set(obj) - _SIGNAL_FIELDS
    if extra:
        raise SignalError(f"unexpected fields: {', '.join(sorted(extra))}")
    missing = _SIGNAL_FIELDS - set(obj)
    if missing:
        raise SignalError(f"missing fields: {', '.join(sorted(missing))}")
    seq, kind, wall = obj["seq"], obj["kind"], obj["wall_time_ms"]
    if type(seq) is not int or seq < 0:
        raise SignalError("seq must be a non-negative integer")
    if type(wall) is not int:
        raise SignalError("wall_time_ms must be an integer")
    if not isinstance(kind, (str, int)) or isinstance(kind, bool):
        raise SignalError("kind must be a string or an integer")
    return RawSignal(seq, kind, obj["payload"], wall)


def print_signal(sig) -> str:
    return json.dumps(
        {"seq": sig.seq, "kind": sig.kind, "payload": sig.payload, "wall_time_ms": sig.wall_time_ms},
        separators=(",", ":"),
    )


# --- reports ------------------------------------------------------------------------


def _item_line(label: str, item) -> str:
    return f"  {label}: {item.id} = {print_term(item.term)}"


def print_report(r) -> str:
    """Human-readable text for a root-cause report or a list of runtime actions."""
    if isinstance(r, (list, tuple)):
        return "\n".join(_action_line(a) for a in r)
    lines = [f"root cause for {r.failure.id}"]
    lines.append(_item_line("failure", r.failure))
    labels = {0: "anomaly", 1: "step"}
    for k, (binder, item) in enumerate(r.witnesses):
        lines.append(_item_line(f"{labels.get(k, 'witness')} ({binder})", item))
    if r.constraints:
        lines.append("  verified:")
        lines.extend(f"    {c.render()}" for c in r.constraints)
    lines.append(f"  proof: {print_term(r.causal_proof)}")
    return "\n".join(lines)


def _action_line(a) -> str:
    d = dict(a.detail)
    where = f"signal {d.pop('signal')}" if "signal" in d else None
    origin = d.pop("origin", None)
    if where is None and origin:
        where = "watcher " + " ".join(origin)
    head = f"[{where}] " if where else ""
    rest = " ".join(f"{k}={v}" for k, v in d.items() if v not in (None, ""))
    return f"{head}{a.kind} {rest}".rstrip()
