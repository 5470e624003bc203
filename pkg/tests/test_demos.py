import glob
import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = sorted(glob.glob(str(Path(__file__).resolve().parent.parent / "demos" / "tour_*.py")))


@pytest.mark.parametrize("path", DEMOS, ids=lambda p: Path(p).name)
def test_demo_runs(path):
    r = subprocess.run([sys.executable, path], capture_output=True, text=True, timeout=120)
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip()
