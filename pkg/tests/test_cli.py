import json
import shutil
import subprocess
import sys

import pytest
from conftest import CORPUS, corpus, scenario_paths

from typedkb.cli import EXIT_DIAG, EXIT_DIVERGED, EXIT_OK, EXIT_UNKNOWN, main


def _defs(scenario):
    out = []
    for p in scenario_paths(scenario):
        out += ["--defs", p]
    return out


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- check ---------------------------------------------------------------------------


def test_check_clean_files(capsys):
    code, out, _ = _run(capsys, "check", *_defs("audit"))
    assert code == EXIT_OK and out.startswith("ok:")


def test_check_reports_rejected_batch(capsys):
    code, out, err = _run(capsys, "check", *_defs("temperature_reject"))
    assert code == EXIT_DIAG and out == ""
    assert "temperature_reject.kos:" in err and "error" in err


def test_check_structured(capsys):
    code, out, _ = _run(capsys, "check", *_defs("temperature_reject"), "--format", "structured")
    rec = json.loads(out)
    assert code == EXIT_DIAG and rec["ok"] is False and rec["diagnostics"]


def test_check_with_too_little_fuel_is_unknown(capsys):
    code, _, err = _run(capsys, "check", *_defs("bearing"), "--fuel", "1")
    assert code == EXIT_UNKNOWN and "budget exhausted" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["check", "--fuel", "0"])
    assert e.value.code == EXIT_DIAG
    code, _, err = _run(capsys, "check")
    assert code == EXIT_DIAG and "--defs" in err
    code, _, _ = _run(capsys, "check", "--defs", corpus("nope.kos"))
    assert code == EXIT_DIAG


# --- normalize -----------------------------------------------------------------------


def test_normalize_identity(capsys):
    code, out, _ = _run(capsys, "normalize", "(\\x.x) 5")
    assert code == EXIT_OK and out.splitlines() == ["5", "1 step"]


def test_normalize_combine(capsys):
    code, out, _ = _run(capsys, "normalize", "combine(ku1, ku2)", *_defs("combine"), "--opaque", "ku1,ku2")
    assert code == EXIT_OK
    assert out.splitlines() == ["<ku1, ku2>", "2 steps (+1 unfolding)"]


def test_normalize_errors(capsys):
    assert _run(capsys, "normalize", "(\\x.x")[0] == EXIT_DIAG
    assert _run(capsys, "normalize", "combine(ku1, ku3)", *_defs("combine"))[0] == EXIT_DIAG
    code, _, err = _run(capsys, "normalize", "(\\x.x) ((\\y.y) 5)", "--fuel", "1")
    assert code == EXIT_UNKNOWN and "unknown" in err


# --- run and replay ------------------------------------------------------------------


def test_run_emergency_stop(capsys, tmp_path):
    wal = tmp_path / "w.wal"
    code, out, _ = _run(capsys, "run", *_defs("estop"), "--signals", corpus("estop_signals.jsonl"),
                        "--wal", str(wal))
    assert code == EXIT_OK
    assert "committed event=e_stop" in out and "committed=1" in out
    assert len(wal.read_text().splitlines()) == 1
    code, out2, _ = _run(capsys, "replay", *_defs("estop"), "--wal", str(wal))
    assert code == EXIT_OK
    digest = out.split("digest=")[-1].split()[0]
    assert f"digest {digest}" in out2 and "clock 1" in out2


def test_structured_run_is_byte_identical(capsys, tmp_path):
    outs = []
    for k in range(2):
        wal = tmp_path / f"w{k}.wal"
        code, out, _ = _run(capsys, "run", *_defs("mixed"), "--signals", corpus("mixed_signals.jsonl"),
                            "--wal", str(wal), "--format", "structured")
        assert code == EXIT_OK
        outs.append(out)
    assert outs[0] == outs[1]
    final = json.loads(outs[0].splitlines()[-1])["final"]
    code, out, _ = _run(capsys, "replay", *_defs("mixed"), "--wal", str(tmp_path / "w0.wal"),
                        "--format", "structured")
    assert json.loads(out)["digest"] == final["digest"]


def test_run_with_commit_fault(capsys, tmp_path):
    wal = tmp_path / "w.wal"
    code, out, err = _run(capsys, "run", *_defs("mixed"), "--signals", corpus("mixed_signals.jsonl"),
                          "--wal", str(wal), "--inject-commit-fault", "2")
    assert code == EXIT_DIAG and "commit failed" in err
    assert "commit-failed" in out and "committed=1" in out
    digest = out.split("digest=")[-1].split()[0]
    code, out, _ = _run(capsys, "replay", *_defs("mixed"), "--wal", str(wal))
    assert code == EXIT_OK and f"digest {digest}" in out


def test_replay_of_a_foreign_log_diverges(capsys, tmp_path):
    # the pump log does not replay against the e-stop definitions
    wal = tmp_path / "w.wal"
    shutil.copy(CORPUS / "wal" / "clean.wal", wal)
    code, _, err = _run(capsys, "replay", *_defs("estop"), "--wal", str(wal))
    assert code == EXIT_DIVERGED and "diverged" in err


def test_replay_of_damaged_logs(capsys):
    for name, clock in (("torn_tail.wal", 2), ("flipped_byte.wal", 1), ("garbage_tail.wal", 3)):
        code, out, _ = _run(capsys, "replay", *_defs("pump"), "--wal", str(CORPUS / "wal" / name))
        assert code == EXIT_OK and f"clock {clock}" in out


# --- trace and whatif ----------------------------------------------------------------


def test_trace_bearing(capsys):
    code, out, _ = _run(capsys, "trace", *_defs("bearing"), "--failure", "f_fail")
    assert code == EXIT_OK
    assert "a_temp" in out and "07:55 < 10:00" in out


def test_trace_structured_and_not_found(capsys):
    code, out, _ = _run(capsys, "trace", *_defs("bearing"), "--format", "structured")
    rec = json.loads(out)
    assert code == EXIT_OK and rec["result"] == "Found" and rec["witnesses"]["a"] == "a_temp"
    code, out, _ = _run(capsys, "trace", *_defs("voltage_dual_rule"))
    assert code == EXIT_OK and out.startswith("NotFound")


def test_trace_without_fuel_is_unknown(capsys):
    code, _, err = _run(capsys, "trace", *_defs("bearing"), "--fuel", "1")
    assert code == EXIT_UNKNOWN


@pytest.mark.parametrize("scenario, removed, verdict", [
    ("voltage_single", "a_volt", "Necessary"),
    ("two_causes", "a_volt", "Redundant"),
    ("bearing", "a_other", "Redundant"),
])
def test_whatif(capsys, scenario, removed, verdict):
    code, out, _ = _run(capsys, "whatif", *_defs(scenario), "--remove", removed)
    assert code == EXIT_OK and out.strip() == verdict


def test_whatif_errors(capsys):
    assert _run(capsys, "whatif", *_defs("bearing"), "--remove", "nothing")[0] == EXIT_DIAG
    assert _run(capsys, "whatif", *_defs("voltage_dual_rule"), "--remove", "a_volt")[0] == EXIT_DIAG


def test_console_script():
    r = subprocess.run([sys.executable, "-c", "import sys; from typedkb.cli import main; sys.exit(main())",
                        "normalize", "(\\x.x) 5", "--format", "structured"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["normal_form"] == "5"
