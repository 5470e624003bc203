"""Signals in, committed transitions out.

The runtime owns the raw signal queue, turns signals into proof-carrying
events through templates, keeps signals whose evidence has not arrived yet
in a pending pool, and commits every transition to a hash-chained
write-ahead log before adopting the new state.

WAL lines are JSON objects::

    {"seq": n, "ops": [...], "record": {...}, "prev_hash": h0, "hash": h1}

``ops`` journals the queue operations (``schedule`` / ``drop``) performed
since the previous line, so replay rebuilds the exact pending queue that
the transition started from. ``hash`` is SHA-256 over ``prev_hash``
followed by the canonical JSON of seq, ops and record.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .kernel import (
    GENESIS,
    Env,
    Event,
    IllTypedPayload,
    KernelState,
    Rejected,
    Transitioned,
    detach,
    drop_head,
    initial_state,
    kstep,
    schedule,
    state_hash,
    view_context,
)
from .resources import Budget, Found, Refuted, Unknown
from .search import run_watchers, search_proof
from .surface import ParseError, format_time, parse_term, parse_time, split_holes
from .terms import TimeLit, consts, instantiate
from .typechecker import TypeCheckError, check, synthesize

log = logging.getLogger(__name__)

FAULT_ENV = "TYPEDKB_COMMIT_FAULT"
MAX_RETRIES = 16


# --- signals and templates ------------------------------------------------------------


@dataclass(frozen=True)
class RawSignal:
    seq: int
    kind: object  # str or int
    payload: object
    wall_time_ms: int


class OutOfOrderSequence(Exception):
    pass


@dataclass(frozen=True)
class Template:
    name: str
    kind: object
    event: str
    args: str  # term source with ${...} holes
    prove: str = "elaborator"  # or "kernel": leave the precondition proof to kstep


@dataclass(frozen=True)
class Elaborated:
    event: Event
    template: str


@dataclass(frozen=True)
class Deferred:
    dependency: str
    template: str


@dataclass(frozen=True)
class Discarded:
    reason: str


class DecodeError(ValueError):
    pass


def _payload_bytes(payload) -> bytes:
    raw = payload.get("raw") if isinstance(payload, dict) else payload
    if not isinstance(raw, str):
        raise DecodeError("payload has no raw byte string")
    try:
        return bytes.fromhex(raw.replace("0x", "").replace(" ", ""))
    except ValueError:
        raise DecodeError(f"bad hex payload {raw!r}") from None


def _kind_matches(template_kind, sig: RawSignal) -> bool:
    if template_kind == sig.kind:
        return True
    if isinstance(template_kind, int):
        if isinstance(sig.kind, str):
            try:
                if int(sig.kind, 0) == template_kind:
                    return True
            except ValueError:
                pass
        try:
            data = _payload_bytes(sig.payload)
        except DecodeError:
            return False
        return bool(data) and data[0] == template_kind
    return False


_BYTE_RE = re.compile(r"byte\[(\d+)\]\s*(?:([+-])\s*(\d+))?")


def _time_text(v) -> str:
    if isinstance(v, bool):
        raise DecodeError("time field is a boolean")
    if isinstance(v, int):
        return format_time(TimeLit(v))
    if isinstance(v, str):
        text = v if v.startswith("@") else "@" + v
        try:
            return format_time(parse_time(text))
        except ValueError:
            raise DecodeError(f"bad time {v!r}") from None
    raise DecodeError(f"bad time {v!r}")


def render_hole(hole: str, sig: RawSignal) -> str:
    """Source text for one ``${...}`` hole of a template."""
    m = _BYTE_RE.fullmatch(hole)
    if m:
        data = _payload_bytes(sig.payload)
        i = int(m.group(1))
        if i >= len(data):
            raise DecodeError(f"payload has no byte {i}")
        v = data[i]
        if m.group(2):
            v = v + int(m.group(3)) if m.group(2) == "+" else v - int(m.group(3))
        if v < 0:
            raise DecodeError("decoded value is negative")
        return str(v)
    name, _, conv = hole.partition(":")
    name = name.strip()
    conv = conv.strip()
    if name == "seq":
        value = sig.seq
    elif name == "wall":
        value = sig.wall_time_ms
    elif name == "kind":
        value = sig.kind
    else:
        if not isinstance(sig.payload, dict) or name not in sig.payload:
            raise DecodeError(f"payload has no field {name!r}")
        value = sig.payload[name]
    if conv == "":
        if isinstance(value, (dict, list)):
            raise DecodeError(f"field {name!r} is not a scalar")
        return str(value)
    if conv == "id":
        return json.dumps(str(value))
    if conv == "val":
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise DecodeError(f"field {name!r} is not a natural number")
        return str(value)
    if conv == "time":
        return _time_text(value)
    if conv == "dur":
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise DecodeError(f"field {name!r} is not a duration")
        return f"@+{value}ms"
    raise DecodeError(f"unknown hole conversion {conv!r}")


def render_template(text: str, sig: RawSignal) -> str:
    out = []
    for part in split_holes(text):
        out.append(render_hole(part[1], sig) if isinstance(part, tuple) else part)
    return "".join(out)


def elaborate(sig: RawSignal, env: Env, state: KernelState, budget: Optional[Budget] = None):
    """Elaborated(event) | Deferred(missing item) | Discarded(reason)."""
    budget = budget or Budget()
    tpl = next((t for t in env.templates if _kind_matches(t.kind, sig)), None)
    if tpl is None:
        return Discarded(f"no template for kind {sig.kind!r}")
    defn = env.events.get(tpl.event)
    if defn is None:
        return Discarded(f"template {tpl.name} names unknown event {tpl.event!r}")
    try:
        text = render_template(tpl.args, sig)
        args = parse_term(text)
    except DecodeError as e:
        return Discarded(f"decode: {e}")
    except ParseError as e:
        return Discarded(f"decode: {e.message}")
    active = {it.id for it in state.knowledge if it.active}
    missing = sorted(n for n in consts(args) if not env.ctx.has_name(n) and n not in active)
    if missing:
        return Deferred(missing[0], tpl.name)
    args = detach(args, state, state.clock)
    fuel = budget.start()
    try:
        check(env.ctx, args, defn.args_type, fuel)
    except TypeCheckError as e:
        return Discarded(f"payload does not fit {defn.name}: {e}")
    except Exception as e:  # FuelExhausted
        return Discarded(f"payload check: {e}")
    prf = None
    if defn.pre is not None and tpl.prove != "kernel":
        view = view_context(env.ctx, state)
        goal = instantiate(defn.pre, args)
        r = synthesize(view, goal, fuel)
        if isinstance(r, Unknown) and r.reason == "undecided":
            facts = [(it.id, it.type) for it in state.knowledge if it.active]
            r = search_proof(view, facts, goal, budget, fuel=fuel)
        if isinstance(r, Refuted):
            return Discarded("precondition refuted")
        if not isinstance(r, Found):
            return Discarded(f"precondition not established ({r.reason})")
        prf = r.proof
    return Elaborated(Event(defn, args, prf), tpl.name)


# --- write-ahead log ------------------------------------------------------------------


class CommitFailed(Exception):
    pass


class ReplayDivergence(Exception):
    def __init__(self, at: int, message: str):
        super().__init__(f"record {at}: {message}")
        self.at = at


def _line_hash(prev: str, seq: int, ops: list, record: dict) -> str:
    body = json.dumps({"seq": seq, "ops": ops, "record": record}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256((prev + body).encode()).hexdigest()


@dataclass
class WalScan:
    lines: list  # parsed, chain-valid line objects
    valid_bytes: int
    problem: Optional[str] = None


def scan_wal(path: str) -> WalScan:
    """Validate the chain line by line, stopping at the first bad or torn line."""
    if not os.path.exists(path):
        return WalScan([], 0)
    with open(path, "rb") as fh:
        data = fh.read()
    lines, pos, prev = [], 0, GENESIS
    while pos < len(data):
        end = data.find(b"\n", pos)
        if end < 0:
            return WalScan(lines, pos, f"torn record at byte {pos}")
        raw = data[pos:end]
        try:
            obj = json.loads(raw.decode())
            ok = (
                obj["prev_hash"] == prev
                and obj["seq"] == len(lines) + 1
                and _line_hash(prev, obj["seq"], obj["ops"], obj["record"]) == obj["hash"]
                and obj["record"]["seq"] == obj["seq"]
            )
        except (ValueError, KeyError, TypeError, UnicodeDecodeError):
            ok = False
        if not ok:
            return WalScan(lines, pos, f"chain broken at record {len(lines) + 1}")
        lines.append(obj)
        prev = obj["hash"]
        pos = end + 1
    return WalScan(lines, pos)


class Wal:
    """Append-only log file; ``append`` returns only after the line is durable and read back."""

    def __init__(self, path: str, fault: Optional[tuple] = None):
        self.path = path
        scan = scan_wal(path)
        if scan.problem:
            raise ValueError(f"{path}: {scan.problem}; recover first")
        self.count = len(scan.lines)
        self.head = scan.lines[-1]["hash"] if scan.lines else GENESIS
        self.fault = fault  # (commit number, mode)
        self.attempts = 0

    def append(self, ops: list, record: dict) -> str:
        self.attempts += 1
        seq = self.count + 1
        h = _line_hash(self.head, seq, ops, record)
        obj = {"seq": seq, "ops": ops, "record": record, "prev_hash": self.head, "hash": h}
        line = (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()
        if self.fault and self.attempts == self.fault[0]:
            if self.fault[1] == "torn":
                with open(self.path, "ab") as fh:
                    fh.write(line[: len(line) // 2])
            raise CommitFailed(f"injected write failure at commit {self.attempts}")
        with open(self.path, "ab") as fh:
            start = fh.tell()
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())
        with open(self.path, "rb") as fh:
            fh.seek(start)
            if fh.read(len(line)) != line:
                raise CommitFailed("write-back verification failed")
        self.count = seq
        self.head = h
        return h


def parse_fault(spec) -> Optional[tuple]:
    """``"3"`` or ``"3:drop"`` -> (3, mode); None or empty -> None."""
    if spec in (None, "", False):
        return None
    if spec is True:
        return (1, "torn")
    text = str(spec)
    num, _, mode = text.partition(":")
    mode = mode or "torn"
    if mode not in ("torn", "drop"):
        raise ValueError(f"unknown fault mode {mode!r}")
    n = int(num)
    if n < 1:
        raise ValueError("fault position starts at 1")
    return (n, mode)


def _replay_lines(lines: list, env: Env, budget: Optional[Budget], start: Optional[KernelState] = None) -> KernelState:
    state = start or initial_state(env)
    for obj in lines:
        at = obj["seq"]
        try:
            for kind, data in obj["ops"]:
                ev = env.event_from_data(data)
                if kind == "schedule":
                    state = schedule(state, env, ev)
                elif kind == "drop":
                    if not state.pending or state.pending[0].to_data() != ev.to_data():
                        raise ReplayDivergence(at, "dropped event is not at the head of the queue")
                    state = drop_head(state)
                else:
                    raise ReplayDivergence(at, f"unknown journal op {kind!r}")
        except (KeyError, IllTypedPayload) as e:
            raise ReplayDivergence(at, f"journal does not apply: {e}") from None
        rec = obj["record"]
        if state_hash(state) != rec["digest_before"]:
            raise ReplayDivergence(at, "state digest before the transition differs")
        r = kstep(state, env, budget)
        if not isinstance(r, Transitioned):
            raise ReplayDivergence(at, f"transition did not reproduce ({getattr(r, 'reason', r)})")
        if r.record.to_json() != rec:
            raise ReplayDivergence(at, "recomputed transition record differs")
        state = r.state
    return state


def recover(path: str, env: Env, budget: Optional[Budget] = None, truncate: bool = True) -> KernelState:
    """Rebuild the last committed state from the WAL.

    The valid prefix of the chain is kept (the file is cut back to it when
    ``truncate``); every transition is re-executed and its digests compared.
    Raises ReplayDivergence when a chain-valid record does not reproduce.
    """
    scan = scan_wal(path)
    if scan.problem:
        log.warning("%s: %s; discarding the tail", path, scan.problem)
        if truncate:
            with open(path, "r+b") as fh:
                fh.truncate(scan.valid_bytes)
    return _replay_lines(scan.lines, env, budget)


# --- the scheduler ------------------------------------------------------------------


@dataclass
class Action:
    kind: str  # committed | rejected | deferred | discarded | abandoned | emitted | commit-failed | idle
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"action": self.kind, **self.detail}


@dataclass
class PoolEntry:
    signal: RawSignal
    dependency: str
    retries: int = 0


class Runtime:
    """Single-writer configuration: live state, raw queue, pending pool and WAL."""

    def __init__(self, env: Env, wal_path: Optional[str] = None, budget: Optional[Budget] = None,
                 fault=None, state: Optional[KernelState] = None):
        self.env = env
        self.budget = budget or Budget()
        if fault is None:
            fault = os.environ.get(FAULT_ENV)
        self.wal = Wal(wal_path, parse_fault(fault)) if wal_path else None
        if state is None:
            state = recover(wal_path, env, self.budget) if wal_path and self.wal.count else initial_state(env)
        self.state = state
        self.committed = state
        self.queue: deque = deque()
        self.pool: list = []
        self.last_seq: Optional[int] = None
        self.journal: list = []
        self.records: list = []
        self.halted: Optional[str] = None
        self.counts = {"committed": 0, "rejected": 0, "deferred": 0, "discarded": 0, "abandoned": 0}

    # input
    def inject(self, sig: RawSignal) -> None:
        if self.last_seq is not None and sig.seq <= self.last_seq:
            raise OutOfOrderSequence(f"sequence {sig.seq} after {self.last_seq}")
        self.last_seq = sig.seq
        self.queue.append(sig)

    # queue operations are journaled for the next WAL line
    def _schedule(self, ev: Event) -> bool:
        try:
            self.state = schedule(self.state, self.env, ev)
        except IllTypedPayload as e:
            log.info("dropping ill-typed event %s: %s", ev.name, e)
            return False
        self.journal.append(["schedule", ev.to_data()])
        return True

    def _drop(self) -> None:
        self.journal.append(["drop", self.state.pending[0].to_data()])
        self.state = drop_head(self.state)

    def _step(self, actions: list, source: dict) -> None:
        """kstep the head event; commit or roll back."""
        before = self.state
        r = kstep(before, self.env, self.budget)
        if isinstance(r, Rejected):
            self.counts["rejected"] += 1
            self._drop()
            actions.append(Action("rejected", {**source, "event": r.event.name, "reason": r.reason.value,
                                               "detail": r.detail, "digest": state_hash(self.state)}))
            return
        if not isinstance(r, Transitioned):
            return
        try:
            self.commit(r)
        except CommitFailed as e:
            # back to the last durable state; the in-flight event is not kept
            self.halted = str(e)
            self.state = self.committed
            self.journal = []
            actions.append(Action("commit-failed", {**source, "event": r.record.event, "error": str(e)}))
            return
        self.counts["committed"] += 1
        actions.append(Action("committed", {**source, "event": r.record.event, "seq": r.record.seq,
                                            "clock": r.record.clock_after, "digest": r.record.digest_after}))
        self._after_commit(actions)

    def commit(self, r: Transitioned) -> None:
        """Persist the record, then adopt the new state; on failure the live state stays."""
        record = r.record.to_json()
        if self.wal is not None:
            self.wal.append(list(self.journal), record)
        self.journal = []
        self.records.append(r.record)
        self.state = r.state
        self.committed = r.state

    def _after_commit(self, actions: list) -> None:
        still = []
        for entry in self.pool:
            if entry.dependency not in {it.id for it in self.state.knowledge if it.active}:
                still.append(entry)
                continue
            out = elaborate(entry.signal, self.env, self.state, self.budget)
            if isinstance(out, Elaborated):
                if self._schedule(out.event):
                    actions.append(Action("resumed", {"signal": entry.signal.seq, "event": out.event.name}))
            elif isinstance(out, Deferred):
                entry.dependency = out.dependency
                entry.retries += 1
                if entry.retries > MAX_RETRIES:
                    self.counts["abandoned"] += 1
                    actions.append(Action("abandoned", {"signal": entry.signal.seq}))
                else:
                    still.append(entry)
            else:
                self.counts["discarded"] += 1
                actions.append(Action("discarded", {"signal": entry.signal.seq, "reason": out.reason}))
        self.pool = still
        for ev in run_watchers(self.state, self.env, self.budget):
            if self._schedule(ev):
                actions.append(Action("emitted", {"event": ev.name, "origin": list(ev.origin)}))

    def scheduler_tick(self) -> list:
        """Process one pending kernel event, or else one raw signal."""
        actions: list = []
        if self.halted:
            return actions
        if self.state.pending:
            head = self.state.pending[0]
            self._step(actions, {"origin": list(head.origin) if head.origin else None})
            return actions
        if not self.queue:
            return actions
        sig = self.queue.popleft()
        out = elaborate(sig, self.env, self.state, self.budget)
        if isinstance(out, Deferred):
            self.counts["deferred"] += 1
            self.pool.append(PoolEntry(sig, out.dependency))
            actions.append(Action("deferred", {"signal": sig.seq, "dependency": out.dependency}))
        elif isinstance(out, Discarded):
            self.counts["discarded"] += 1
            actions.append(Action("discarded", {"signal": sig.seq, "reason": out.reason}))
        elif self._schedule(out.event):
            self._step(actions, {"signal": sig.seq})
        else:
            self.counts["discarded"] += 1
            actions.append(Action("discarded", {"signal": sig.seq, "reason": "ill-typed payload"}))
        return actions

    @property
    def idle(self) -> bool:
        return bool(self.halted) or (not self.queue and not self.state.pending)

    def run(self, limit: int = 1_000_000) -> list:
        """Tick until both queues are empty (or a commit failed)."""
        actions: list = []
        for _ in range(limit):
            if self.idle:
                break
            actions.extend(self.scheduler_tick())
        for entry in self.pool:
            actions.append(Action("unresolved", {"signal": entry.signal.seq, "dependency": entry.dependency}))
        return actions


def read_signals(path: str) -> tuple[list, list]:
    """Parse a signal stream; malformed lines become diagnostics, not errors."""
    from .surface import SignalError, parse_signal

    sigs, problems = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                sigs.append(parse_signal(line))
            except SignalError as e:
                problems.append((lineno, str(e)))
    return sigs, problems


__all__ = [
    "Action", "CommitFailed", "Deferred", "Discarded", "Elaborated", "FAULT_ENV", "OutOfOrderSequence",
    "RawSignal", "ReplayDivergence", "Runtime", "Template", "Wal", "elaborate", "parse_fault",
    "read_signals", "recover", "render_template", "scan_wal",
]
