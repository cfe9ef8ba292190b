"""Acceptance suite: runs ``rearrange suite acceptance --seed 7`` twice.

Prints one PASS/FAIL line per criterion (1-11 from the manifest, 12 from a
byte comparison of the two manifests).  Runnable with pytest or directly
with ``python3 tests/test_acceptance.py``.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

SEED = 7
IDS = list(range(1, 13))


def run_suite(out_dir: Path) -> bytes:
    cmd = [sys.executable, "-m", "rearrange", "suite", "acceptance", "--seed", str(SEED), "--out", str(out_dir)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode not in (0, 3):
        raise RuntimeError(f"suite crashed (exit {proc.returncode}):\n{proc.stderr}")
    return (out_dir / "manifest.json").read_bytes()


def collect() -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        first = run_suite(Path(tmp) / "a")
        second = run_suite(Path(tmp) / "b")
    doc = json.loads(first)
    results = {c["id"]: c for c in doc["criteria"]}
    results[12] = {
        "id": 12,
        "title": "identical manifests for identical seed",
        "passed": first == second,
        "metrics": {"bytes": len(first), "identical": first == second},
        "thresholds": {"comparison": "byte-for-byte"},
    }
    return results


def _short(d: dict) -> str:
    parts = []
    for k, v in sorted(d.items()):
        if isinstance(v, float):
            parts.append(f"{k}={v:.4g}")
        elif isinstance(v, (int, bool, str)):
            parts.append(f"{k}={v}")
    return ", ".join(parts)


def line(rec: dict) -> str:
    status = "PASS" if rec["passed"] else "FAIL"
    return f"[{status}] criterion {rec['id']:>2}: {rec['title']} | {_short(rec['metrics'])} | tolerances: {_short(rec['thresholds'])}"


@pytest.fixture(scope="module")
def results():
    res = collect()
    print()
    for cid in IDS:
        print(line(res[cid]))
    return res


@pytest.mark.parametrize("cid", IDS, ids=[f"criterion-{i:02d}" for i in IDS])
def test_criterion(results, cid):
    rec = results[cid]
    print(line(rec))
    assert rec["passed"], line(rec)


if __name__ == "__main__":
    res = collect()
    for cid in IDS:
        print(line(res[cid]))
    sys.exit(0 if all(r["passed"] for r in res.values()) else 1)
