"""Regenerate corpus/wal/: one clean log and three damaged copies of it.

The clean log comes from running corpus/pump_ok.jsonl (three accepted
pressure readings) against pump.kos. The damaged copies are:

* torn_tail.wal: the last record cut off halfway, as after a crash mid-write;
* flipped_byte.wal: one byte changed inside record 2;
* garbage_tail.wal: a partial line of junk after the last good record.
"""
import os
import shutil
import tempfile
from pathlib import Path

from typedkb.loader import load_files
from typedkb.runtime import Runtime, read_signals

ROOT = Path(__file__).resolve().parent.parent / "corpus"
OUT = ROOT / "wal"


def clean_log(path: Path) -> None:
    env, diags = load_files([ROOT / "pump.kos"])
    assert not diags, diags
    rt = Runtime(env, str(path))
    sigs, _ = read_signals(ROOT / "pump_ok.jsonl")
    for s in sigs:
        rt.inject(s)
    rt.run()


def main() -> None:
    OUT.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "clean.wal"
        clean_log(src)
        shutil.copy(src, OUT / "clean.wal")
    data = (OUT / "clean.wal").read_bytes()
    lines = data.splitlines(keepends=True)
    assert len(lines) == 3

    (OUT / "torn_tail.wal").write_bytes(b"".join(lines[:2]) + lines[2][: len(lines[2]) // 2])

    second = bytearray(lines[1])
    pos = second.index(b'"clock_after"') + len(b'"clock_after":')
    second[pos] = ord("7") if second[pos] != ord("7") else ord("8")
    (OUT / "flipped_byte.wal").write_bytes(lines[0] + bytes(second) + lines[2])

    (OUT / "garbage_tail.wal").write_bytes(data + b'{"seq":4,"ops":[],"rec')
    for name in sorted(os.listdir(OUT)):
        print(name, (OUT / name).stat().st_size)


if __name__ == "__main__":
    main()
