"""Signals in, proofs checked, state changed: the emergency stop and pump interlock.

Run from the repository root:  python demos/tour_runtime.py
"""
import tempfile
from pathlib import Path

from typedkb.kernel import state_hash
from typedkb.loader import load_files
from typedkb.runtime import Runtime, read_signals, recover
from typedkb.surface import print_report

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def run(defs, signals, wal, fault=""):
    env, _ = load_files([CORPUS / d for d in defs])
    rt = Runtime(env, wal, fault=fault)
    sigs, _ = read_signals(CORPUS / signals)
    for s in sigs:
        rt.inject(s)
    print(print_report(rt.run()))
    return rt


with tempfile.TemporaryDirectory() as tmp:
    print("# 0x4A 0x02: 82 degrees against a threshold of 80")
    rt = run(["estop.kos"], "estop_signals.jsonl", f"{tmp}/estop.wal")
    print("status_M1 is now", rt.state.item("status_M1").term.name)

    print("\n# 120 kPa is outside the safe band; the kernel refuses the transition")
    rt = run(["pump.kos"], "pump_signals.jsonl", f"{tmp}/pump.wal")

    print("\n# the second commit fails to reach the disk")
    wal = f"{tmp}/mixed.wal"
    rt = run(["pump.kos", "estop.kos"], "mixed_signals.jsonl", wal, fault="2:torn")
    print("live state digest    ", state_hash(rt.state))
    print("recovered from the log", state_hash(recover(wal, rt.env)))
