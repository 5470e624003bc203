"""Command line entry point: ``typedkb <command> [options]``.

Exit codes: 0 success, 1 diagnostics (bad input, type errors, failed
commits), 2 a budget ran out before an answer, 3 the WAL does not replay.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from .kernel import initial_state, state_hash
from .loader import has_errors, has_unknowns, load_files
from .reducer import normalize, whnf
from .resources import Budget, FuelExhausted, Unknown
from .runtime import FAULT_ENV, OutOfOrderSequence, ReplayDivergence, Runtime, read_signals, recover
from .search import (
    Contribution,
    PreconditionUnproven,
    RootCauseReport,
    build_root_cause,
    counterfactual_contrib,
)
from .surface import ParseError, parse_term, print_report, print_term
from .terms import Const, Context, Def, Sigma, instantiate
from .typechecker import TypeCheckError, _equal, infer

EXIT_OK, EXIT_DIAG, EXIT_UNKNOWN, EXIT_DIVERGED = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if n <= 0:
        raise argparse.ArgumentTypeError("budget values must be positive")
    return n


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; argparse's own 2 would read as Unknown."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DIAG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--defs", action="append", default=[], metavar="PATH",
                        help="definition file (repeat to load several, in order)")
    common.add_argument("--fuel", type=_positive, default=1_000_000)
    common.add_argument("--depth", type=_positive, default=64)
    common.add_argument("--timeout-ms", type=_positive, default=5000)
    common.add_argument("--format", choices=("text", "structured"), default="text")

    ap = _Parser(prog="typedkb", description="Typed knowledge base toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("check", parents=[common], help="typecheck definition files")

    p = sub.add_parser("normalize", parents=[common], help="print the normal form of a term")
    p.add_argument("term")
    p.add_argument("--opaque", default="", metavar="NAMES",
                   help="comma-separated definitions to keep folded")

    p = sub.add_parser("run", parents=[common], help="feed signals through the runtime")
    p.add_argument("--signals", required=True, metavar="PATH")
    p.add_argument("--wal", metavar="PATH")
    p.add_argument("--inject-commit-fault", nargs="?", const="1", default=None, metavar="K[:MODE]",
                   help=f"fail the K-th commit (mode torn or drop); also via ${FAULT_ENV}")

    p = sub.add_parser("replay", parents=[common], help="rebuild the state from a WAL")
    p.add_argument("--wal", required=True, metavar="PATH")

    for name, what in (("trace", "build the root-cause report for a failure"),
                       ("whatif", "is a fact necessary for the root-cause goal?")):
        p = sub.add_parser(name, parents=[common], help=what)
        p.add_argument("--wal", metavar="PATH", help="use the state recovered from this WAL")
        p.add_argument("--failure", metavar="ID")
        p.add_argument("--report-type", default="RootCauseReport", metavar="TERM")
        if name == "whatif":
            p.add_argument("--remove", required=True, metavar="ID")
    return ap


def _budget(args) -> Budget:
    return Budget(fuel=args.fuel, depth=args.depth, timeout_ms=args.timeout_ms)


def _emit(args, text: str, record: Optional[dict] = None) -> None:
    if args.format == "structured":
        print(json.dumps(record, sort_keys=True, separators=(",", ":")))
    else:
        print(text)


def _load(args):
    if not args.defs:
        return None, []
    try:
        env, diags = load_files(args.defs, args.fuel)
    except OSError as e:
        raise _Fail(EXIT_DIAG, f"cannot read definitions: {e}") from None
    for d in diags:
        print(d.render(), file=sys.stderr)
    if env is None or has_errors(diags):
        raise _Fail(EXIT_DIAG, "definitions have errors")
    if has_unknowns(diags):
        raise _Fail(EXIT_UNKNOWN, "unknown: budget exhausted while checking definitions")
    return env, diags


def _require_env(args):
    env, _ = _load(args)
    if env is None:
        raise _Fail(EXIT_DIAG, "--defs is required")
    return env


# --- commands -----------------------------------------------------------------------


def cmd_check(args) -> int:
    if not args.defs:
        raise _Fail(EXIT_DIAG, "--defs is required")
    try:
        env, diags = load_files(args.defs, args.fuel)
    except OSError as e:
        raise _Fail(EXIT_DIAG, f"cannot read definitions: {e}") from None
    for d in diags:
        print(d.render(), file=sys.stderr)
    bad = env is None or has_errors(diags)
    if args.format == "structured":
        print(json.dumps({"ok": not bad, "diagnostics": [d.to_json() for d in diags]}, sort_keys=True))
    elif not bad and not has_unknowns(diags):
        n = len(env.ctx) + len(env.facts) + len(env.events)
        print(f"ok: {n} declarations, {len(env.templates)} templates, {len(env.watchers)} watchers")
    if bad:
        return EXIT_DIAG
    return EXIT_UNKNOWN if has_unknowns(diags) else EXIT_OK


def cmd_normalize(args) -> int:
    env, _ = _load(args)
    ctx = env.ctx if env else Context()
    if env:
        for f in env.facts:
            ctx = ctx.define(Def(f.id, f.term, f.type))
    try:
        t = parse_term(args.term)
    except ParseError as e:
        raise _Fail(EXIT_DIAG, f"<term>:{e}") from None
    budget = _budget(args)
    fuel = budget.start()
    try:
        infer(ctx, t, fuel)
        opaque = [n for n in args.opaque.split(",") if n.strip()]
        nf, trace = normalize(t, ctx.opaque(n.strip() for n in opaque), fuel)
    except TypeCheckError as e:
        raise _Fail(EXIT_DIAG, f"<term>: {e}") from None
    except FuelExhausted as e:
        raise _Fail(EXIT_UNKNOWN, f"unknown: budget exhausted ({e.reason})") from None
    core = [s for s in trace if not s.auxiliary]
    text = f"{print_term(nf)}\n{len(core)} step{'s' if len(core) != 1 else ''}"
    aux = len(trace) - len(core)
    if aux:
        text += f" (+{aux} unfolding{'s' if aux != 1 else ''})"
    _emit(args, text, {
        "normal_form": print_term(nf),
        "steps": len(core),
        "trace": [{"rule": s.rule.value, "path": list(s.path), "auxiliary": s.auxiliary} for s in trace],
    })
    return EXIT_OK


def cmd_run(args) -> int:
    env = _require_env(args)
    try:
        sigs, problems = read_signals(args.signals)
    except OSError as e:
        raise _Fail(EXIT_DIAG, f"cannot read signals: {e}") from None
    for lineno, msg in problems:
        print(f"{args.signals}:{lineno}: warning: signal skipped: {msg}", file=sys.stderr)
    try:
        rt = Runtime(env, args.wal, _budget(args), fault=args.inject_commit_fault)
    except (ValueError, ReplayDivergence) as e:
        code = EXIT_DIVERGED if isinstance(e, ReplayDivergence) else EXIT_DIAG
        raise _Fail(code, f"{args.wal}: {e}") from None
    for s in sigs:
        try:
            rt.inject(s)
        except OutOfOrderSequence as e:
            print(f"{args.signals}: warning: signal skipped: {e}", file=sys.stderr)
    for a in rt.run():
        _emit(args, print_report([a]), a.to_json())
    digest = state_hash(rt.committed)
    summary = dict(rt.counts, digest=digest, clock=rt.committed.clock)
    _emit(args, "final: " + " ".join(f"{k}={v}" for k, v in summary.items()), {"final": summary})
    if rt.halted:
        print(f"error: commit failed: {rt.halted}", file=sys.stderr)
        return EXIT_DIAG
    return EXIT_OK


def cmd_replay(args) -> int:
    env = _require_env(args)
    try:
        state = recover(args.wal, env, _budget(args), truncate=False)
    except ReplayDivergence as e:
        raise _Fail(EXIT_DIVERGED, f"{args.wal}: replay diverged at {e}") from None
    digest = state_hash(state)
    _emit(args, f"digest {digest}\nclock {state.clock}\nitems {len(state.active())} active",
          {"digest": digest, "clock": state.clock, "active": [it.id for it in state.active()]})
    return EXIT_OK


def _report_setup(args):
    env = _require_env(args)
    state = initial_state(env)
    if args.wal:
        try:
            state = recover(args.wal, env, _budget(args), truncate=False)
        except ReplayDivergence as e:
            raise _Fail(EXIT_DIVERGED, f"{args.wal}: replay diverged at {e}") from None
    try:
        rtype = parse_term(args.report_type)
        infer(env.ctx, rtype)
    except (ParseError, TypeCheckError) as e:
        raise _Fail(EXIT_DIAG, f"--report-type: {e}") from None
    facts = state.active()
    head = whnf(rtype, env.ctx)
    if not isinstance(head, Sigma):
        raise _Fail(EXIT_DIAG, "--report-type must be a dependent pair starting with the failure")
    if args.failure:
        failure = state.item(args.failure)
        if failure is None or not failure.active:
            raise _Fail(EXIT_DIAG, f"no active item {args.failure!r}")
    else:
        matches = [it for it in facts if _equal(env.ctx, it.type, head.fst, _budget(args).start())]
        if len(matches) != 1:
            raise _Fail(EXIT_DIAG, f"{len(matches)} candidate failures; name one with --failure")
        failure = matches[0]
    return env, facts, failure, rtype, head


def cmd_trace(args) -> int:
    env, facts, failure, rtype, _ = _report_setup(args)
    r = build_root_cause(env.ctx, facts, failure, rtype, _budget(args))
    if isinstance(r, Unknown):
        raise _Fail(EXIT_UNKNOWN, f"unknown: budget exhausted ({r.reason})")
    if not isinstance(r, RootCauseReport):
        _emit(args, f"NotFound: no root cause for {failure.id}", {"failure": failure.id, "result": "NotFound"})
        return EXIT_OK
    _emit(args, print_report(r), {
        "failure": failure.id,
        "result": "Found",
        "witnesses": {name: it.id for name, it in r.witnesses},
        "constraints": [c.render() for c in r.constraints],
        "proof": print_term(r.causal_proof),
        "term": print_term(r.term),
    })
    return EXIT_OK


def cmd_whatif(args) -> int:
    env, facts, failure, _, head = _report_setup(args)
    goal = instantiate(head.snd, Const(failure.id))
    try:
        r = counterfactual_contrib(env.ctx, facts, args.remove, goal, _budget(args))
    except KeyError as e:
        raise _Fail(EXIT_DIAG, str(e.args[0])) from None
    except PreconditionUnproven as e:
        raise _Fail(EXIT_DIAG, str(e)) from None
    if isinstance(r, Unknown):
        raise _Fail(EXIT_UNKNOWN, f"unknown: budget exhausted ({r.reason})")
    assert isinstance(r, Contribution)
    _emit(args, r.value, {"removed": args.remove, "failure": failure.id, "goal": print_term(goal),
                          "contribution": r.value})
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "normalize": cmd_normalize,
    "run": cmd_run,
    "replay": cmd_replay,
    "trace": cmd_trace,
    "whatif": cmd_whatif,
}


def main(argv: Optional[list] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except _Fail as f:
        print(f"error: {f}", file=sys.stderr)
        return f.code


if __name__ == "__main__":
    sys.exit(main())
