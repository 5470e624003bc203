import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from typedkb.loader import has_errors, load_files  # noqa: E402
from typedkb.runtime import FAULT_ENV, Runtime, read_signals  # noqa: E402

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# file sets that make up each scenario, in load order
SCENARIOS = {
    "temperature": ["temperature.kos"],
    "temperature_reject": ["temperature.kos", "temperature_reject.kos"],
    "combine": ["combine.kos"],
    "estop": ["estop.kos"],
    "pump": ["pump.kos"],
    "mixed": ["pump.kos", "estop.kos"],
    "esqi": ["bearing_types.kos", "esqi.kos"],
    "bearing": ["bearing_types.kos", "bearing_rule_single.kos", "bearing.kos"],
    "voltage_single": ["bearing_types.kos", "bearing_rule_single.kos", "bearing_voltage.kos"],
    "voltage_dual_rule": ["bearing_types.kos", "bearing_rule_dual.kos", "bearing_voltage.kos"],
    "dual_dual_rule": ["bearing_types.kos", "bearing_rule_dual.kos", "bearing_dual.kos"],
    "two_causes": ["bearing_types.kos", "bearing_rule_single.kos", "bearing_two_causes.kos"],
    "audit": ["bearing_types.kos", "bearing_rule_single.kos", "bearing.kos", "audit.kos"],
}


def corpus(name: str) -> str:
    return str(CORPUS / name)


def scenario_paths(name: str) -> list:
    return [corpus(f) for f in SCENARIOS[name]]


_ENVS: dict = {}


def load_scenario(name: str):
    """Checked environment for a scenario (cached; environments are read-only)."""
    if name not in _ENVS:
        env, diags = load_files(scenario_paths(name))
        assert env is not None and not has_errors(diags), [d.render() for d in diags]
        _ENVS[name] = env
    return _ENVS[name]


def run_signals(scenario: str, signals: str, wal=None, fault=None, budget=None) -> Runtime:
    sigs, problems = read_signals(corpus(signals))
    assert not problems
    rt = Runtime(load_scenario(scenario), wal, budget, fault=fault or "")
    for s in sigs:
        rt.inject(s)
    rt.actions = rt.run()
    return rt


@pytest.fixture(autouse=True)
def _no_ambient_fault(monkeypatch):
    monkeypatch.delenv(FAULT_ENV, raising=False)
