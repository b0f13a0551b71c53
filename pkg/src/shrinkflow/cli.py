"""Command line entry points: experiment runs, verification, replays.

Runs are deterministic given (config, seed): every artifact file is
listed in the manifest with a content hash, reductions happen in fixed
order, and all CSV floats are written with full precision.

Exit codes: 0 success, 1 verification failure, 2 config error, 3 numeric
failure, 4 a wandering run that returned (contradicting the no-return
prediction).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import acceptance as acc
from . import flow as fl
from . import geometry as geo
from . import graphs as gr
from . import group as gp
from . import inequalities as iq
from . import reduction as rd
from . import shrinkers as sh
from .errors import ConfigError, ShrinkflowError

KINDS = ("flow", "spectrum", "find", "shoot", "entropy", "loja",
         "noreturn", "lsreduce", "replay")


@dataclass
class ExperimentConfig:
    kind: str
    base: dict = field(default_factory=dict)
    perturbation: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    seed: int = 0
    snapshot_dt: float = 0.1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        kind = data.get("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
        cfg = cls(kind=kind,
                  base=dict(data.get("base", {})),
                  perturbation=dict(data.get("perturbation", {})),
                  numerics=dict(data.get("numerics", {})),
                  seed=int(data.get("seed", 0)),
                  snapshot_dt=float(data.get("snapshot_dt", 0.1)))
        for key, val in cfg.numerics.items():
            if key.startswith(("tol", "delta", "sigma")) and val <= 0:
                raise ConfigError(f"numeric setting {key} must be positive")
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def build_base(spec: dict):
    kind = spec.get("type", "circle")
    n = int(spec.get("n_samples", 256))
    if kind == "circle":
        return geo.build_circle(float(spec.get("radius", np.sqrt(2.0))), n)
    if kind == "sphere":
        return geo.build_sphere(float(spec.get("radius", 2.0)), n)
    if kind == "ellipse":
        axes = spec.get("axes", (1.5 * np.sqrt(2.0), 1.2 * np.sqrt(2.0)))
        return geo.build_ellipse(float(axes[0]), float(axes[1]), n)
    if kind == "torus":
        bracket = tuple(spec.get("bracket", (0.3, 1.2)))
        return sh.shoot_angenent_torus(bracket, n_samples=n).state
    if kind == "file":
        return geo.load_state(spec["path"]).surface
    raise ConfigError(f"unknown base type {kind!r}")


def build_perturbation(base, spec: dict, seed: int) -> np.ndarray:
    n = base.n_samples
    amp = float(spec.get("amplitude", 0.0))
    if not spec or amp == 0.0:
        return np.zeros(n)
    if "mode" in spec:
        k = int(spec["mode"])
        theta = np.arange(n) * 2.0 * np.pi / n
        field_ = np.cos(k * theta) if base.kind == geo.KIND_CURVE else None
        if field_ is None:
            dec = sh.spectrum(base, max(k + 3, 6))
            field_ = dec.field(min(k, len(dec.eigenvalues) - 1))
    elif "eigenmode" in spec:
        dec = sh.spectrum(base, int(spec["eigenmode"]) + 3)
        field_ = dec.field(int(spec["eigenmode"]))
    else:
        rng = np.random.default_rng(seed + int(spec.get("seed", 0)))
        theta = np.arange(n) * 2.0 * np.pi / n
        field_ = np.zeros(n)
        for k in range(1, 7):
            a_c, b_c = rng.normal(size=2) / (1 + k) ** 2
            field_ += a_c * np.cos(k * theta)
            if base.kind == geo.KIND_CURVE:
                field_ += b_c * np.sin(k * theta)
    field_ = field_ / max(np.abs(field_).max(), 1e-300)
    return amp * field_


class RunDir:
    def __init__(self, path: str):
        self.path = path
        os.makedirs(path, exist_ok=True)
        self.artifacts = {}

    def write(self, rel: str, text: str):
        full = os.path.join(self.path, rel)
        os.makedirs(os.path.dirname(full) or self.path, exist_ok=True)
        with open(full, "w") as fh:
            fh.write(text)
        self.artifacts[rel] = hashlib.sha256(text.encode()).hexdigest()

    def manifest(self, config: ExperimentConfig, timings: dict, extra=None):
        payload = {"config": config.to_dict(),
                   "versions": {"shrinkflow": __version__,
                                "numpy": np.__version__,
                                "python": platform.python_version()},
                   "timings": timings,
                   "artifacts": self.artifacts}
        if extra:
            payload.update(extra)
        with open(os.path.join(self.path, "manifest.json"), "w") as fh:
            json.dump(payload, fh, indent=1)


def _flow_opts(numerics: dict, snapshot_dt: float) -> fl.FlowOptions:
    opts = fl.FlowOptions(snapshot_dt=snapshot_dt)
    for key in ("sigma", "tol", "record_every", "reparam_every",
                "intersection_every", "axis_floor", "scheme", "dt",
                "spacing_floor_frac"):
        if key in numerics:
            setattr(opts, key, type(getattr(opts, key, 0.0))(numerics[key])
                    if getattr(opts, key, None) is not None else numerics[key])
    return opts


def run_experiment(config: ExperimentConfig, out_dir: str, seed=None) -> int:
    t_start = time.time()
    rundir = RunDir(out_dir)
    seed = config.seed if seed is None else int(seed)
    numerics = config.numerics
    status = 0
    extra = {}
    try:
        if config.kind == "replay":
            return _run_replay(config, rundir, seed, t_start)
        base = build_base(config.base)
        if config.kind == "flow":
            u0 = build_perturbation(base, config.perturbation, seed)
            horizon = float(numerics.get("horizon", 2.0))
            opts = _flow_opts(numerics, config.snapshot_dt)
            if config.base.get("intrinsic", False) or np.any(
                    np.asarray(config.perturbation.get("points_only", False))):
                traj = fl.run_curve_flow(base, horizon, opts)
            else:
                traj = fl.run_graph_flow(base, u0, horizon, opts)
            rundir.write("trajectory.csv", traj.to_csv())
            rundir.write("snapshots.json", json.dumps(
                {"kind": traj.kind, "termination": traj.termination,
                 "events": traj.events, "snapshots": traj.snapshots}))
            rundir.write("base_state.json", json.dumps(geo.state_to_dict(base)))
            rundir.write("reference.json", json.dumps(
                {"F_limit": geo.gaussian_area(base)}))
            extra["termination"] = traj.termination
            if traj.termination == "blowup":
                status = 3
        elif config.kind == "spectrum":
            dec = sh.spectrum(base, int(numerics.get("k_max", 12)))
            rundir.write("spectrum.csv", sh.spectrum_csv(dec))
            rep = sh.stability_report(base, dec)
            rundir.write("stability.json", json.dumps({
                "stable_modulo_group": rep.stable_modulo_group,
                "ambiguous": rep.ambiguous, "morse_index": rep.morse_index,
                "positive_eigenvalues": rep.positive_eigenvalues,
                "notes": rep.notes}))
        elif config.kind == "find":
            u0 = build_perturbation(base, config.perturbation, seed)
            res = sh.newton_find_shrinker(base, u0,
                                          float(numerics.get("tol", 1e-10)))
            rundir.write("newton.json", json.dumps(
                {"iterations": res.iterations, "residuals": res.residuals,
                 "error_ratios": res.error_ratios}))
        elif config.kind == "shoot":
            bracket = tuple(numerics.get("bracket", (0.3, 1.2)))
            shoot = sh.shoot_angenent_torus(
                bracket, ode_tol=float(numerics.get("ode_tol", 1e-12)),
                n_samples=int(config.base.get("n_samples", 256)))
            rundir.write("state.json",
                         json.dumps(geo.state_to_dict(shoot.state)))
            rows = ["r0,defect"] + [f"{r:.17g},{d:.17g}"
                                    for r, d in shoot.defect_table]
            rundir.write("defects.csv", "\n".join(rows) + "\n")
            rundir.write("shoot.json", json.dumps(
                {"r0": shoot.r0, "residual_sup": shoot.residual_sup,
                 "closure_defect": shoot.closure_defect,
                 "half_length": shoot.half_length}))
        elif config.kind == "entropy":
            res = geo.entropy(base)
            rundir.write("entropy.json", json.dumps(
                {"value": res.value, "t0": res.t0, "x0": res.x0.tolist(),
                 "converged": res.converged}))
            if not res.converged:
                status = 3
        elif config.kind == "loja":
            u0 = build_perturbation(base, config.perturbation, seed)
            horizon = float(numerics.get("horizon", 3.2))
            traj = fl.run_graph_flow(base, u0, horizon,
                                     _flow_opts(numerics, config.snapshot_dt))
            f_limit = geo.gaussian_area(base)
            rep = iq.lojasiewicz_check(traj, f_limit,
                                       float(numerics.get("beta", 0.5)))
            rundir.write("trajectory.csv", traj.to_csv())
            rundir.write("report.json", json.dumps(rep.to_dict()))
            rows = ["log_gap,log_grad2"]
            beta = float(numerics.get("beta", 0.5))
            for lhs, rhs in rep.pairs:
                rows.append(f"{np.log(lhs ** (1.0 / (2.0 - beta))):.17g},"
                            f"{np.log(rhs):.17g}")
            rundir.write("loglog.csv", "\n".join(rows) + "\n")
        elif config.kind == "noreturn":
            u0 = build_perturbation(base, config.perturbation, seed)
            verdict, _ = gp.no_return_experiment(
                base, u0,
                float(numerics.get("delta1", 0.05)),
                float(numerics.get("delta2", 0.1)),
                float(numerics.get("horizon", 40.0)),
                opts=_flow_opts(numerics, config.snapshot_dt),
                monitor_dt=float(numerics.get("monitor_dt", 0.25)))
            rundir.write("verdict.json", verdict.to_json())
            rows = ["t,distance"] + [f"{t:.17g},{d:.17g}"
                                     for t, d in verdict.distances]
            rundir.write("distances.csv", "\n".join(rows) + "\n")
            if verdict.verdict == "RETURNED":
                status = 4
        elif config.kind == "lsreduce":
            red = rd.build_reduction(
                base, synthetic_m=int(numerics.get("synthetic_m", 2)))
            rng = np.random.default_rng(seed)
            theta = np.arange(base.n_samples) * 2 * np.pi / base.n_samples
            u_dir = 0.04 * np.cos(2 * theta) + 0.03 * np.cos(theta)
            ladder = rd.ratio_ladder(red, u_dir, [0.1, 0.05, 0.025, 0.0125])
            rundir.write("reduction.json", json.dumps(
                {"kernel_dim": red.kernel_dim, "synthetic": red.synthetic,
                 "lemma_F_ladder": ladder}))
            rows = ["c1,f,grad_norm"]
            for c1 in np.linspace(-0.06, 0.06, 25):
                val, grad = rd.reduced_function(red, [c1] +
                                                [0.0] * (red.kernel_dim - 1))
                rows.append(f"{c1:.17g},{val:.17g},"
                            f"{np.linalg.norm(grad):.17g}")
            rundir.write("landscape.csv", "\n".join(rows) + "\n")
        else:
            raise ConfigError(f"unhandled kind {config.kind!r}")
    except ConfigError:
        raise
    except ShrinkflowError as exc:
        extra["error"] = f"{type(exc).__name__}: {exc}"
        status = 3
    rundir.manifest(config, {"elapsed_s": round(time.time() - t_start, 3)},
                    extra)
    return status


def _run_replay(config: ExperimentConfig, rundir: RunDir, seed: int,
                t_start: float) -> int:
    num = config.numerics
    traj_dir = config.base.get("traj_dir")
    if not traj_dir:
        raise ConfigError("replay needs base.traj_dir")
    with open(os.path.join(traj_dir, "snapshots.json")) as fh:
        snap_payload = json.load(fh)
    traj = fl.FlowTrajectory(kind=snap_payload["kind"])
    traj.snapshots = snap_payload["snapshots"]
    base = None
    if snap_payload["kind"] == "graph":
        base_path = os.path.join(traj_dir, "base_state.json")
        if not os.path.exists(base_path):
            raise ConfigError("stored graph run carries no base_state.json")
        with open(base_path) as fh:
            base = geo.state_from_dict(json.load(fh)).surface
    stored = gp.StoredFlow.from_trajectory(traj, base)
    sched = gp.comeback_schedule(float(num["t1"]), float(num["t2"]),
                                 float(num["b"]),
                                 y0=num.get("y0", (0.0, 0.0)))
    times = np.linspace(sched.T_bar, 0.0, int(num.get("n_times", 33)))
    replay = gp.renormalized_flow(stored, sched.y0, sched.t0, sched.a, times)
    rundir.write("replay.csv", replay.to_csv())
    rundir.write("schedule.json", json.dumps(
        {"T1": sched.T1, "T2": sched.T2, "b": sched.b, "t0": sched.t0,
         "a": sched.a, "T_bar": sched.T_bar,
         "identity_residuals": sched.identity_residuals()}))
    residual = fl.gradient_identity_residual(replay)
    rundir.write("replay_residual.json", json.dumps(
        {"max_rel_residual": float(residual.max())}))
    rundir.manifest(config, {"elapsed_s": round(time.time() - t_start, 3)})
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="shrinkflow",
        description="numerical laboratory for rescaled mean curvature flow "
                    "near closed self-shrinkers")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=1,
                       help="reserved for batch configs")

    p_ver = sub.add_parser("verify", help="run an acceptance suite")
    p_ver.add_argument("suite", choices=sorted(acc.SUITES))
    p_ver.add_argument("--out", default="")
    p_ver.add_argument("--seed", type=int, default=1234)

    p_rep = sub.add_parser("replay", help="replay a stored flow")
    p_rep.add_argument("--traj", required=True)
    p_rep.add_argument("--t1", type=float, required=True)
    p_rep.add_argument("--t2", type=float, required=True)
    p_rep.add_argument("--b", type=float, required=True)
    p_rep.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        try:
            config = ExperimentConfig.load(args.config)
            return run_experiment(config, args.out, args.seed)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    if args.command == "verify":
        results = acc.run_suite(args.suite, out_dir=args.out, seed=args.seed)
        return 0 if all(c.passed for c in results) else 1
    if args.command == "replay":
        config = ExperimentConfig.from_dict(
            {"kind": "replay", "base": {"traj_dir": args.traj},
             "numerics": {"t1": args.t1, "t2": args.t2, "b": args.b}})
        try:
            return run_experiment(config, args.out)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
