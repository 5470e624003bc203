"""Turn a parsed ``.kos`` module into a checked environment."""
from __future__ import annotations

from typing import Optional

from .kernel import CLOCK_NAME, Effect, Env, EventDef, KnowledgeItem, detach, initial_state
from .resources import FuelExhausted, as_fuel
from .runtime import Template
from .search import Watcher
from .surface import Diagnostic, Module, ParseError, Span, parse_module
from .terms import VAL, Context, DataLevel, Decl, Def, Prop, SortTerm, ValLit, consts
from .typechecker import TypeCheckError, check, infer, sort_of


def parse_defs(text: str) -> tuple[Optional[Module], list]:
    """Parse a module; syntax errors and duplicate names become diagnostics."""
    try:
        mod = parse_module(text)
    except ParseError as e:
        return None, [e.diagnostic]
    diags = []
    seen: dict = {}
    named = [(d.name, d.span) for d in mod.decls]
    named += [(e.name, e.span) for e in mod.events]
    named += [(t.name, t.span) for t in mod.templates]
    named += [(w.name, w.span) for w in mod.watchers]
    for name, span in named:
        if name in seen:
            diags.append(Diagnostic(f"duplicate name {name!r} (first declared at {seen[name]})", span))
        else:
            seen[name] = span
    return mod, diags


def _type_error(e: TypeCheckError, mod: Module, fallback: Span, what: str) -> Diagnostic:
    span = mod.spans.get(id(e.term), fallback) if e.term is not None else fallback
    return Diagnostic(f"{what}: {e}", span)


def build_env(mod: Module, fuel=None) -> tuple[Env, list]:
    """Check declarations in order; the result holds only the ones that checked."""
    fuel = as_fuel(fuel)
    diags: list = []
    ctx = Context()
    facts: list = []

    def defined(name: str) -> bool:
        return ctx.has_name(name) or any(f.id == name for f in facts)

    for d in mod.decls:
        if defined(d.name) or d.name == CLOCK_NAME:
            diags.append(Diagnostic(f"duplicate name {d.name!r}", d.span))
            continue
        try:
            if d.kind == "sort":
                if d.value is not None:
                    s = sort_of(ctx, d.value, fuel)
                    entry = Def(d.name, d.value, SortTerm(s))
                else:
                    entry = Decl(d.name, SortTerm(DataLevel(0)))
            elif d.kind == "type":
                entry = Def(d.name, d.value, SortTerm(sort_of(ctx, d.value, fuel)))
            elif d.kind == "axiom":
                sort_of(ctx, d.type, fuel)
                entry = Decl(d.name, d.type)
            elif d.kind == "def":
                if d.type is not None:
                    sort_of(ctx, d.type, fuel)
                    check(ctx, d.value, d.type, fuel)
                    entry = Def(d.name, d.value, d.type)
                else:
                    entry = Def(d.name, d.value, infer(ctx, d.value, fuel))
            elif d.kind == "fact":
                fctx = ctx
                for f in facts:
                    fctx = fctx.define(Def(f.id, f.term, f.type))
                sort_of(fctx, d.type, fuel)
                check(fctx, d.value, d.type, fuel)
                tmp = initial_state(Env(facts=facts))
                facts.append(KnowledgeItem(d.name, detach(d.value, tmp, 0), detach(d.type, tmp, 0)))
                continue
            else:
                continue
        except TypeCheckError as e:
            diags.append(_type_error(e, mod, d.span, f"{d.kind} {d.name}"))
            continue
        except FuelExhausted:
            diags.append(Diagnostic(f"{d.kind} {d.name}: budget exhausted while checking", d.span, "unknown"))
            continue
        ctx = ctx.define(entry)

    # the state view used by event clauses: globals, the clock, initial facts
    view = ctx.define(Def(CLOCK_NAME, ValLit(0), VAL))
    for f in facts:
        view = view.define(Def(f.id, f.term, f.type))

    def check_clause(term, scope: Context, expect_prop: bool, where: str, span: Span) -> None:
        unknown = sorted(n for n in consts(term) if not scope.has_name(n))
        if unknown:
            diags.append(Diagnostic(f"{where}: refers to {', '.join(unknown)}, not known at load time", span, "warning"))
            return
        try:
            s = sort_of(scope, term, fuel)
            if expect_prop and not isinstance(s, Prop):
                diags.append(Diagnostic(f"{where}: expected a proposition, got a type in {s}", span))
        except TypeCheckError as e:
            diags.append(_type_error(e, mod, span, where))
        except FuelExhausted:
            diags.append(Diagnostic(f"{where}: budget exhausted while checking", span, "unknown"))

    events: dict = {}
    undecided: set = set()  # events left out for lack of budget; not an error downstream
    for ev in mod.events:
        if ev.name in events or defined(ev.name):
            diags.append(Diagnostic(f"duplicate name {ev.name!r}", ev.span))
            continue
        try:
            sort_of(ctx, ev.args_type, fuel)
        except TypeCheckError as e:
            diags.append(_type_error(e, mod, ev.span, f"event {ev.name} args"))
            continue
        except FuelExhausted:
            diags.append(Diagnostic(f"event {ev.name} args: budget exhausted while checking", ev.span, "unknown"))
            undecided.add(ev.name)
            continue
        inner = view.extend(Decl(ev.arg_name, ev.args_type))
        if ev.pre is not None:
            check_clause(ev.pre, inner, True, f"event {ev.name} pre", ev.span)
        if ev.post is not None:
            check_clause(ev.post, inner, True, f"event {ev.name} post", ev.span)
        effects = []
        for op in ev.ops:
            if op.kind == "add":
                check_clause(op.type, inner, False, f"event {ev.name} add", op.span or ev.span)
                effects.append(Effect("add", tuple(op.target), op.type, op.value))
            elif op.kind == "invalidate":
                effects.append(Effect("invalidate", tuple(op.target)))
            else:
                effects.append(Effect("enqueue", (op.target,), value=op.value))
        events[ev.name] = EventDef(ev.name, ev.args_type, ev.pre, ev.post, tuple(effects), ev.arg_name)
    for ev in mod.events:
        for op in ev.ops:
            if op.kind == "enqueue" and op.target not in events and op.target not in undecided:
                diags.append(Diagnostic(f"event {ev.name} enqueues unknown event {op.target!r}", op.span or ev.span))

    templates = []
    for t in mod.templates:
        if t.event not in events:
            if t.event in undecided:
                continue
            diags.append(Diagnostic(f"template {t.name} targets unknown event {t.event!r}", t.span))
            continue
        templates.append(Template(t.name, t.kind, t.event, t.args, t.prove))

    watchers = []
    for w in mod.watchers:
        if w.emit_event not in events:
            if w.emit_event in undecided:
                continue
            diags.append(Diagnostic(f"watcher {w.name} emits unknown event {w.emit_event!r}", w.span))
            continue
        watchers.append(
            Watcher(w.name, tuple(w.binders), w.emit_event, w.emit_args, w.when, w.guard, w.report)
        )

    env = Env(ctx=ctx, events=events, templates=templates, watchers=watchers, facts=facts)
    return env, diags


def load_env(text: str, fuel=None) -> tuple[Optional[Env], list]:
    """Parse and check; returns (env or None, diagnostics)."""
    mod, diags = parse_defs(text)
    if mod is None:
        return None, diags
    env, more = build_env(mod, fuel)
    return env, diags + more


def load_files(paths: list, fuel=None) -> tuple[Optional[Env], list]:
    """Concatenate several definition files and load them as one module."""
    texts, starts = [], []
    line = 1
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            text = fh.read()
        starts.append((line, str(p)))
        texts.append(text)
        line += text.count("\n") + 1
    env, diags = load_env("\n".join(texts), fuel)
    return env, [_locate(d, starts) for d in diags]


def _locate(d: Diagnostic, starts: list) -> Diagnostic:
    """Point a diagnostic on the concatenated text back at its own file."""
    if d.span is None:
        return d
    first, name = max((s for s in starts if s[0] <= d.span.line), default=starts[0])
    off = first - 1
    span = Span(d.span.line - off, d.span.col, d.span.end_line - off, d.span.end_col)
    return Diagnostic(d.message, span, d.severity, name)


def has_errors(diags: list) -> bool:
    return any(d.severity == "error" for d in diags)


def has_unknowns(diags: list) -> bool:
    """Some declaration could not be decided within the budget (and was left out)."""
    return any(d.severity == "unknown" for d in diags)


__all__ = ["build_env", "has_errors", "has_unknowns", "load_env", "load_files", "parse_defs"]
