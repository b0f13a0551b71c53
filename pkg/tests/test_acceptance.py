"""Acceptance gate: runs the full verification suite through the CLI and
asserts every criterion at its stated tolerance, then repeats the run and
checks byte-identical CSV outputs (the determinism criterion applied to
the whole suite)."""

import hashlib
import json
import pathlib
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "shrinkflow.cli"]

CRITERIA = [
    "A1 functional values",
    "A2 taylor table",
    "A3 spectrum",
    "A4 gradient identity",
    "A5 linear decay rates",
    "A6 comeback schedule",
    "A7 calculus lemmas",
    "A8 lojasiewicz inequality",
    "A9 drift bound",
    "A10 shrinker finding",
    "A11 instability and no-return",
    "A12 lyapunov-schmidt",
    "A13 determinism",
]


@pytest.fixture(scope="session")
def verify_runs(tmp_path_factory):
    outs = []
    for tag in ("one", "two"):
        out = tmp_path_factory.mktemp(f"verify_{tag}")
        res = subprocess.run(CLI + ["verify", "all", "--out", str(out)],
                             capture_output=True, text=True)
        outs.append((out, res))
    return outs


@pytest.fixture(scope="session")
def criteria(verify_runs):
    out, res = verify_runs[0]
    assert res.returncode == 0, f"verify all failed:\n{res.stdout}\n{res.stderr}"
    payload = json.loads((out / "criteria.json").read_text())
    return {c["name"]: c for c in payload}


@pytest.mark.parametrize("name", CRITERIA)
def test_criterion(criteria, name):
    assert name in criteria, f"criterion {name} missing from the suite"
    entry = criteria[name]
    assert entry["passed"], f"{name}: {entry['notes']}"


def test_one_line_per_criterion(verify_runs):
    _, res = verify_runs[0]
    lines = [l for l in res.stdout.splitlines() if l.startswith("[")]
    assert len(lines) == len(CRITERIA)
    assert all(l.startswith("[PASS]") for l in lines)


def test_repeated_suite_runs_are_byte_identical(verify_runs):
    (out1, res1), (out2, res2) = verify_runs
    assert res2.returncode == 0

    def csv_hashes(root):
        hashes = {}
        for path in sorted(pathlib.Path(root).rglob("*.csv")):
            rel = path.relative_to(root)
            hashes[str(rel)] = hashlib.sha256(path.read_bytes()).hexdigest()
        return hashes

    h1, h2 = csv_hashes(out1), csv_hashes(out2)
    assert h1, "verify all produced no CSV artifacts"
    assert h1 == h2


def test_expected_artifacts_exist(verify_runs):
    out, _ = verify_runs[0]
    for rel in ("criteria.json",
                "runs/circle_decay_256/trajectory.csv",
                "spectra/circle.csv", "spectra/sphere.csv",
                "spectra/torus.csv", "states/torus.json",
                "loja/report.json", "loja/loglog.csv",
                "noreturn/verdicts.json", "noreturn/distances.csv",
                "noreturn/sphere_contrast.csv",
                "reduction/landscape.csv", "drift/windows.json"):
        assert (out / rel).exists(), f"missing artifact {rel}"
