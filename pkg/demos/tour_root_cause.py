"""Root cause of the B2310 hardness failure, and what-if questions about it.

Run from the repository root:  python demos/tour_root_cause.py
"""
from pathlib import Path

from typedkb.kernel import initial_state
from typedkb.loader import load_files
from typedkb.search import build_root_cause, counterfactual_contrib
from typedkb.surface import parse_term, print_report

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(*names):
    env, _ = load_files([CORPUS / n for n in ("bearing_types.kos",) + names])
    return env, initial_state(env)


env, s = load("bearing_rule_single.kos", "bearing.kos")
report = build_root_cause(env.ctx, s.active(), s.item("f_fail"), parse_term("RootCauseReport"))
print(print_report(report))

# With the stricter rule a voltage anomaly alone explains nothing.
env, s = load("bearing_rule_dual.kos", "bearing_voltage.kos")
print("\ndual rule, voltage only:", build_root_cause(env.ctx, s.active(), s.item("f_fail"),
                                                    parse_term("RootCauseReport")))

goal = parse_term("(a : Anomaly) * CausalProof(a, f_fail)")
for facts in ("bearing_voltage.kos", "bearing_two_causes.kos"):
    env, s = load("bearing_rule_single.kos", facts)
    r = counterfactual_contrib(env.ctx, s.active(), "a_volt", goal)
    print(f"without a_volt ({facts}):", r.value)
