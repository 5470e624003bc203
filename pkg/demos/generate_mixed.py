"""Regenerate corpus/mixed_signals.jsonl, a seeded 100-signal stream.

The stream mixes pump pressure readings (a good share outside the safe
band, so the kernel refuses them), start requests for an unknown pump,
over-temperature alarms, and a few signals no template accepts.
"""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "corpus" / "mixed_signals.jsonl"
BASE_MS = 1696924800000


def signals(n=100, seed=7):
    rng = random.Random(seed)
    for seq in range(1, n + 1):
        wall = BASE_MS + seq * 1000
        roll = rng.random()
        if roll < 0.55:
            kpa = rng.choice([rng.randint(25, 105), rng.randint(115, 200), rng.randint(0, 15)])
            payload = {"pump": "P1", "kpa": kpa}
            yield {"seq": seq, "kind": "pressure", "payload": payload, "wall_time_ms": wall}
        elif roll < 0.65:
            payload = {"pump": "P2", "kpa": rng.randint(25, 105)}
            yield {"seq": seq, "kind": "pressure", "payload": payload, "wall_time_ms": wall}
        elif roll < 0.85:
            raw = "4A%02X" % rng.randint(0, 9)
            yield {"seq": seq, "kind": "temp_alarm", "payload": {"raw": raw}, "wall_time_ms": wall}
        else:
            yield {"seq": seq, "kind": "0xFF", "payload": {"raw": "FF00"}, "wall_time_ms": wall}


if __name__ == "__main__":
    with OUT.open("w") as fh:
        for s in signals():
            fh.write(json.dumps(s) + "\n")
    print(f"wrote {OUT}")
