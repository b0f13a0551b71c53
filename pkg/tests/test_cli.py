import json
import subprocess
import sys

import numpy as np
import pytest

CLI = [sys.executable, "-m", "shrinkflow.cli"]


def run_cli(*args):
    return subprocess.run(CLI + list(args), capture_output=True, text=True)


def write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_malformed_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    out = tmp_path / "out"
    res = run_cli("run", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 2
    assert not (out / "manifest.json").exists()


def test_unknown_kind_exits_2(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"kind": "nope"})
    res = run_cli("run", "--config", cfg, "--out", str(tmp_path / "o"))
    assert res.returncode == 2


def test_flow_run_writes_artifacts(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "kind": "flow",
        "base": {"type": "circle", "radius": 2 ** 0.5, "n_samples": 64},
        "perturbation": {"mode": 2, "amplitude": 0.05},
        "numerics": {"horizon": 0.5},
        "snapshot_dt": 0.1,
    })
    out = tmp_path / "run"
    res = run_cli("run", "--config", cfg, "--out", str(out))
    assert res.returncode == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["artifacts"]) >= {"trajectory.csv", "snapshots.json",
                                          "reference.json"}
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,F,grad_norm2,sup_u,sup_du,orbit_dist,dt"
    f_vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert np.all(np.diff(f_vals) <= 1e-10 * (1 + np.abs(f_vals[:-1])))


def test_flow_run_determinism(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "kind": "flow",
        "base": {"type": "circle", "radius": 2 ** 0.5, "n_samples": 64},
        "perturbation": {"amplitude": 0.02, "seed": 3},
        "numerics": {"horizon": 0.2},
        "seed": 5,
    })
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli("run", "--config", cfg, "--out", str(out1)).returncode == 0
    assert run_cli("run", "--config", cfg, "--out", str(out2)).returncode == 0
    assert (out1 / "trajectory.csv").read_bytes() == \
        (out2 / "trajectory.csv").read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())["artifacts"]
    m2 = json.loads((out2 / "manifest.json").read_text())["artifacts"]
    assert m1 == m2  # content hashes identical


def test_spectrum_run(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "kind": "spectrum",
        "base": {"type": "circle", "radius": 2 ** 0.5, "n_samples": 128},
        "numerics": {"k_max": 6},
    })
    out = tmp_path / "spec"
    assert run_cli("run", "--config", cfg, "--out", str(out)).returncode == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue,marker"
    top = float(lines[1].split(",")[1])
    assert abs(top - 1.0) < 1e-6
    stab = json.loads((out / "stability.json").read_text())
    assert stab["stable_modulo_group"] is True


def test_entropy_run(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "kind": "entropy",
        "base": {"type": "circle", "radius": 1.0, "n_samples": 128},
    })
    out = tmp_path / "ent"
    assert run_cli("run", "--config", cfg, "--out", str(out)).returncode == 0
    rep = json.loads((out / "entropy.json").read_text())
    assert abs(rep["value"] - 2 * np.sqrt(2) * np.pi * np.exp(-0.5)) < 1e-6
    assert abs(rep["t0"] - np.sqrt(2)) < 1e-4


def test_replay_cli(tmp_path):
    cfg = write_config(tmp_path / "c.json", {
        "kind": "flow",
        "base": {"type": "circle", "radius": 2 ** 0.5, "n_samples": 64},
        "perturbation": {"mode": 2, "amplitude": 0.05},
        "numerics": {"horizon": 1.5},
        "snapshot_dt": 0.02,
    })
    run_dir = tmp_path / "stored"
    assert run_cli("run", "--config", cfg, "--out", str(run_dir)).returncode == 0
    out = tmp_path / "replay"
    res = run_cli("replay", "--traj", str(run_dir), "--t1", "0.3",
                  "--t2", "1.2", "--b", "0.9", "--out", str(out))
    assert res.returncode == 0
    sched = json.loads((out / "schedule.json").read_text())
    assert abs(sched["t0"] - (1 - 0.81 * np.exp(-1.2))) < 1e-12
    assert abs(sched["identity_residuals"]["at_tbar"]) < 1e-12
    resid = json.loads((out / "replay_residual.json").read_text())
    assert resid["max_rel_residual"] < 0.05


def test_verify_geometry_suite(tmp_path):
    res = run_cli("verify", "geometry", "--out", str(tmp_path / "v"))
    assert res.returncode == 0
    assert "[PASS] A1" in res.stdout
    crit = json.loads((tmp_path / "v" / "criteria.json").read_text())
    assert crit[0]["passed"] is True


def test_verify_unknown_suite():
    res = run_cli("verify", "nonsense")
    assert res.returncode == 2


def test_config_roundtrip_bit_exact(tmp_path):
    from shrinkflow.cli import ExperimentConfig
    payload = {"kind": "flow",
               "base": {"type": "circle", "radius": 2 ** 0.5, "n_samples": 64},
               "perturbation": {"mode": 2, "amplitude": 0.123456789012345678},
               "numerics": {"horizon": 0.3, "sigma": 0.2},
               "seed": 42, "snapshot_dt": 0.05}
    cfg = ExperimentConfig.from_dict(payload)
    text = json.dumps(cfg.to_dict())
    again = ExperimentConfig.from_dict(json.loads(text))
    assert json.dumps(again.to_dict()) == text
    assert again.perturbation["amplitude"] == payload["perturbation"]["amplitude"]
