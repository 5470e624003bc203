"""A walk through the core calculus: parse, typecheck, normalize.

Run from the repository root:  python demos/tour_core.py
"""
from pathlib import Path

from typedkb.loader import load_files
from typedkb.reducer import normalize
from typedkb.surface import parse_term, print_term
from typedkb.typechecker import TypeCheckError, check, infer

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

env, diags = load_files([CORPUS / "temperature.kos"])
ctx = env.ctx

# A temperature reading is only a QualifiedTemp together with its proofs.
obj = parse_term("<<25, p_unit>, p_range>")
check(ctx, obj, parse_term("QualifiedTemp"))
print("obj      :", print_term(obj), ": QualifiedTemp")

# Loading the failed batch is refused at load time.
_, diags = load_files([CORPUS / "temperature.kos", CORPUS / "temperature_reject.kos"])
for d in diags:
    print("rejected :", d.render())

# combine ku1 ku2, with the readings kept folded so the two beta steps show.
env, _ = load_files([CORPUS / "combine.kos"])
t = parse_term("combine(ku1, ku2)")
nf, trace = normalize(t, env.ctx.opaque(["ku1", "ku2"]))
print("combine  :", print_term(nf))
for step in trace:
    tag = " (unfold)" if step.auxiliary else ""
    print("   step", step.rule.value, list(step.path), tag)

# Humidity is not pressure.
try:
    infer(env.ctx, parse_term("combine(ku1, ku3)"))
except TypeCheckError as e:
    print("ill-typed:", e.kind.value, "-", e)
