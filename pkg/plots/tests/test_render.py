"""The plotting package consumes shrinkflow's run directories through the
documented file interfaces only, so these tests first create real run
artifacts by invoking the primary CLI as a subprocess."""

import json
import subprocess
import sys

import pytest

from shrinkflow_plots import FIGURE_KINDS, MissingArtifact, PlotSpec, render
from shrinkflow_plots.cli import main as plot_main

PRIMARY = [sys.executable, "-m", "shrinkflow.cli"]
ROOT2 = 2.0 ** 0.5


def primary(*args):
    res = subprocess.run(PRIMARY + list(args), capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("rundirs")

    def cfg(name, payload):
        path = root / f"{name}.json"
        path.write_text(json.dumps(payload))
        return str(path)

    flow_dir = root / "flow"
    primary("run", "--config",
            cfg("flow", {"kind": "flow",
                         "base": {"type": "circle", "radius": ROOT2,
                                  "n_samples": 128},
                         "perturbation": {"mode": 2, "amplitude": 0.05},
                         "numerics": {"horizon": 1.0},
                         "snapshot_dt": 0.1}),
            "--out", str(flow_dir))

    loja_dir = root / "loja"
    primary("run", "--config",
            cfg("loja", {"kind": "loja",
                         "base": {"type": "circle", "radius": ROOT2,
                                  "n_samples": 128},
                         "perturbation": {"mode": 2, "amplitude": 3e-4},
                         "numerics": {"horizon": 3.2},
                         "snapshot_dt": 0.05}),
            "--out", str(loja_dir))

    spec_dir = root / "spectrum"
    primary("run", "--config",
            cfg("spec", {"kind": "spectrum",
                         "base": {"type": "circle", "radius": ROOT2,
                                  "n_samples": 128},
                         "numerics": {"k_max": 9}}),
            "--out", str(spec_dir))

    shoot_dir = root / "shoot"
    primary("run", "--config",
            cfg("shoot", {"kind": "shoot",
                          "base": {"n_samples": 128},
                          "numerics": {"bracket": [0.3, 1.2]}}),
            "--out", str(shoot_dir))

    noreturn_dir = root / "noreturn"
    primary("run", "--config",
            cfg("nr", {"kind": "noreturn",
                       "base": {"type": "circle", "radius": ROOT2,
                                "n_samples": 128},
                       "perturbation": {"mode": 2, "amplitude": 0.05},
                       "numerics": {"horizon": 2.0, "delta1": 0.05,
                                    "delta2": 0.1, "monitor_dt": 0.25}}),
            "--out", str(noreturn_dir))

    red_dir = root / "lsreduce"
    primary("run", "--config",
            cfg("red", {"kind": "lsreduce",
                        "base": {"type": "circle", "radius": ROOT2,
                                 "n_samples": 128},
                        "numerics": {"synthetic_m": 2}}),
            "--out", str(red_dir))

    return {"F-decay": flow_dir, "loglog-loja": loja_dir,
            "orbit-distance": noreturn_dir, "spectrum-stem": spec_dir,
            "profile-curve": shoot_dir, "reduced-landscape": red_dir}


@pytest.mark.parametrize("kind", FIGURE_KINDS)
def test_every_kind_renders(artifacts, kind, tmp_path):
    out = tmp_path / f"{kind}.png"
    info = render(PlotSpec(run_dir=str(artifacts[kind]), kind=kind,
                           out_path=str(out)))
    assert out.exists()
    assert out.stat().st_size > 2000
    assert isinstance(info, dict)


def test_rendering_is_idempotent(artifacts, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        render(PlotSpec(run_dir=str(artifacts["F-decay"]), kind="F-decay",
                        out_path=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_loglog_annotation_matches_report(artifacts, tmp_path):
    run_dir = artifacts["loglog-loja"]
    info = render(PlotSpec(run_dir=str(run_dir), kind="loglog-loja",
                           out_path=str(tmp_path / "l.png")))
    rep = json.loads((run_dir / "report.json").read_text())
    slope = rep["fitted"]["tail_slope"]
    assert info["slope"] == slope
    assert info["slope_text"] == f"tail slope = {slope:.4f}"


def test_f_decay_reference_line_from_artifacts(artifacts, tmp_path):
    run_dir = artifacts["F-decay"]
    info = render(PlotSpec(run_dir=str(run_dir), kind="F-decay",
                           out_path=str(tmp_path / "f.png")))
    ref = json.loads((run_dir / "reference.json").read_text())
    assert info["F_limit"] == ref["F_limit"]


def test_orbit_bands_from_verdict(artifacts, tmp_path):
    info = render(PlotSpec(run_dir=str(artifacts["orbit-distance"]),
                           kind="orbit-distance",
                           out_path=str(tmp_path / "o.png")))
    assert info["delta1"] == 0.05
    assert info["delta2"] == 0.1
    assert info["verdicts"] == ["NEVER_LEFT"]


def test_spectrum_markers(artifacts, tmp_path):
    info = render(PlotSpec(run_dir=str(artifacts["spectrum-stem"]),
                           kind="spectrum-stem",
                           out_path=str(tmp_path / "s.png")))
    assert info["markers"][0] == "dilation"
    assert abs(info["eigenvalues"][0] - 1.0) < 1e-6


def test_missing_run_dir_errors(tmp_path):
    with pytest.raises(MissingArtifact):
        render(PlotSpec(run_dir=str(tmp_path / "empty"), kind="F-decay",
                        out_path=str(tmp_path / "x.png")))
    rc = plot_main(["--run", str(tmp_path / "empty"), "--kind", "F-decay",
                    "--out", str(tmp_path / "x.png")])
    assert rc == 1


def test_missing_column_named(tmp_path):
    run = tmp_path / "run"
    run.mkdir()
    (run / "trajectory.csv").write_text("t,notF\n0,1\n1,2\n")
    with pytest.raises(Exception) as err:
        render(PlotSpec(run_dir=str(run), kind="F-decay",
                        out_path=str(tmp_path / "x.png")))
    assert "'F'" in str(err.value)


def test_cli_renders(artifacts, tmp_path):
    out = tmp_path / "cli.png"
    rc = plot_main(["--run", str(artifacts["spectrum-stem"]),
                    "--kind", "spectrum-stem", "--out", str(out)])
    assert rc == 0
    assert out.exists()


def test_verification_layout_resolution(artifacts, tmp_path):
    # the same artifacts arranged as `shrinkflow verify all --out DIR`
    import shutil
    vd = tmp_path / "verify_layout"
    (vd / "runs" / "circle_decay_256").mkdir(parents=True)
    (vd / "loja").mkdir()
    (vd / "noreturn").mkdir()
    (vd / "spectra").mkdir()
    (vd / "states").mkdir()
    (vd / "reduction").mkdir()
    shutil.copy(artifacts["F-decay"] / "trajectory.csv",
                vd / "runs" / "circle_decay_256" / "trajectory.csv")
    shutil.copy(artifacts["F-decay"] / "reference.json",
                vd / "runs" / "circle_decay_256" / "reference.json")
    shutil.copy(artifacts["loglog-loja"] / "loglog.csv", vd / "loja" / "loglog.csv")
    shutil.copy(artifacts["loglog-loja"] / "report.json", vd / "loja" / "report.json")
    dist_text = (artifacts["orbit-distance"] / "distances.csv").read_text()
    rows = dist_text.splitlines()
    multi = ["run,t,distance"] + [f"0,{r}" for r in rows[1:]]
    (vd / "noreturn" / "distances.csv").write_text("\n".join(multi) + "\n")
    verdict = json.loads((artifacts["orbit-distance"] / "verdict.json").read_text())
    (vd / "noreturn" / "verdicts.json").write_text(json.dumps([verdict]))
    shutil.copy(artifacts["spectrum-stem"] / "spectrum.csv",
                vd / "spectra" / "circle.csv")
    shutil.copy(artifacts["profile-curve"] / "state.json",
                vd / "states" / "torus.json")
    shutil.copy(artifacts["reduced-landscape"] / "landscape.csv",
                vd / "reduction" / "landscape.csv")
    for kind in FIGURE_KINDS:
        out = tmp_path / f"v_{kind}.png"
        render(PlotSpec(run_dir=str(vd), kind=kind, out_path=str(out)))
        assert out.exists()
