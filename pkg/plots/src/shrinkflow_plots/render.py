"""Figure rendering from shrinkflow run directories.

Every number shown is read from the run artifacts (CSV time series,
report and manifest JSON); nothing is recomputed here.  Rendering is
idempotent: identical inputs and style produce byte-identical images.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("F-decay", "loglog-loja", "orbit-distance", "spectrum-stem",
                "profile-curve", "reduced-landscape")

# candidate artifact locations per figure kind, relative to the run dir:
# single-experiment layouts first, then the verification-suite layout
_CANDIDATES = {
    "F-decay": ("trajectory.csv", "runs/circle_decay_256/trajectory.csv"),
    "loglog-loja": ("loglog.csv", "loja/loglog.csv"),
    "orbit-distance": ("distances.csv", "noreturn/distances.csv"),
    "spectrum-stem": ("spectrum.csv", "spectra/circle.csv"),
    "profile-curve": ("state.json", "states/torus.json"),
    "reduced-landscape": ("landscape.csv", "reduction/landscape.csv"),
}


class MissingArtifact(FileNotFoundError):
    pass


class MissingColumn(KeyError):
    pass


@dataclass
class PlotSpec:
    run_dir: str
    kind: str
    out_path: str
    style: dict = field(default_factory=dict)
    artifact: str = ""          # explicit artifact path override

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"figure kind must be one of {FIGURE_KINDS}, got {self.kind!r}")


def _find(spec: PlotSpec, *extra) -> str:
    names = (spec.artifact,) if spec.artifact else _CANDIDATES[spec.kind] + extra
    for name in names:
        if not name:
            continue
        path = os.path.join(spec.run_dir, name)
        if os.path.exists(path):
            return path
    raise MissingArtifact(
        f"{spec.kind}: none of {names} exist under {spec.run_dir}")


def _sibling(path: str, name: str):
    cand = os.path.join(os.path.dirname(path), name)
    return cand if os.path.exists(cand) else None


def _read_csv(path: str, columns) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        have = reader.fieldnames or []
    for col in columns:
        if col not in have:
            raise MissingColumn(f"{os.path.basename(path)} lacks column "
                                f"{col!r} (has {have})")
    return {col: np.array([float(r[col]) for r in rows]) for col in columns}


def _new_axes(style):
    fig, ax = plt.subplots(figsize=style.get("figsize", (6.0, 4.0)),
                           dpi=style.get("dpi", 120))
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, out_path):
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    fig.savefig(out_path, metadata={"Software": "shrinkflow-plot"})
    plt.close(fig)


def render(spec: PlotSpec) -> dict:
    """Render one figure; returns the annotation payload that was drawn."""
    return _RENDERERS[spec.kind](spec)


def _render_f_decay(spec: PlotSpec) -> dict:
    path = _find(spec)
    data = _read_csv(path, ["t", "F"])
    fig, ax = _new_axes(spec.style)
    ax.plot(data["t"], data["F"], lw=1.5, color="tab:blue")
    info = {}
    ref = _sibling(path, "reference.json")
    if ref:
        f_limit = json.load(open(ref))["F_limit"]
        ax.axhline(f_limit, color="tab:red", ls="--", lw=1.0,
                   label=f"F limit = {f_limit:.5f}")
        ax.legend(loc="upper right")
        info["F_limit"] = f_limit
    ax.set_xlabel("t")
    ax.set_ylabel("Gaussian area F")
    ax.set_title("Gaussian area along the flow")
    _save(fig, spec.out_path)
    return info


def _render_loglog(spec: PlotSpec) -> dict:
    path = _find(spec)
    data = _read_csv(path, ["log_gap", "log_grad2"])
    fig, ax = _new_axes(spec.style)
    ax.plot(data["log_grad2"], data["log_gap"], ".", ms=3, color="tab:blue")
    info = {}
    report = _sibling(path, "report.json")
    if report:
        rep = json.load(open(report))
        slope = rep["fitted"].get("tail_slope", rep["fitted"].get("loglog_slope"))
        beta_max = rep["fitted"].get("beta_admissible_max")
        slope_text = f"tail slope = {slope:.4f}"
        beta_text = (f"admissible exponents < {beta_max:.3f}"
                     if beta_max is not None else "")
        ax.annotate(slope_text + "\n" + beta_text, xy=(0.05, 0.95),
                    xycoords="axes fraction", va="top",
                    bbox={"boxstyle": "round", "fc": "w", "alpha": 0.8})
        info["slope"] = slope
        info["slope_text"] = slope_text
        info["beta_admissible_max"] = beta_max
        x = np.array([data["log_grad2"].min(), data["log_grad2"].max()])
        mid_y = data["log_gap"].mean() - slope * data["log_grad2"].mean()
        ax.plot(x, slope * x + mid_y, color="tab:red", lw=1.0, ls="--")
    ax.set_xlabel("log squared gradient norm")
    ax.set_ylabel("log |F - F_limit|")
    ax.set_title("Gradient inequality scaling")
    _save(fig, spec.out_path)
    return info


def _render_orbit(spec: PlotSpec) -> dict:
    path = _find(spec)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    multi = "run" in header
    cols = ["run", "t", "distance"] if multi else ["t", "distance"]
    data = _read_csv(path, cols)
    fig, ax = _new_axes(spec.style)
    if multi:
        for run_id in np.unique(data["run"]):
            mask = data["run"] == run_id
            ax.plot(data["t"][mask], data["distance"][mask], lw=0.9, alpha=0.7)
    else:
        ax.plot(data["t"], data["distance"], lw=1.4, color="tab:blue")
    info = {}
    verdicts = (_sibling(path, "verdicts.json")
                or _sibling(path, "verdict.json"))
    if verdicts:
        payload = json.load(open(verdicts))
        entries = payload if isinstance(payload, list) else [payload]
        d1 = entries[0].get("delta1")
        d2 = entries[0].get("delta2")
        if d1 is not None and np.isfinite(d1):
            ax.axhline(d1, color="tab:green", ls=":", lw=1.2,
                       label=f"delta1 = {d1:g}")
            ax.axhline(d2, color="tab:red", ls=":", lw=1.2,
                       label=f"delta2 = {d2:g}")
            info["delta1"], info["delta2"] = d1, d2
        for entry in entries:
            if entry.get("t_exit") is not None:
                ax.axvline(entry["t_exit"], color="tab:red", alpha=0.25, lw=0.8)
            if entry.get("t_return") is not None:
                ax.axvline(entry["t_return"], color="tab:green", alpha=0.4,
                           lw=0.8)
        info["verdicts"] = [e["verdict"] for e in entries]
        if info.get("delta1") is not None:
            ax.legend(loc="upper left")
    ax.set_xlabel("t")
    ax.set_ylabel("distance to the base orbit")
    ax.set_title("Orbit distance along wandering runs")
    _save(fig, spec.out_path)
    return info


def _render_spectrum(spec: PlotSpec) -> dict:
    path = _find(spec)
    data = _read_csv(path, ["index", "eigenvalue"])
    with open(path, newline="") as fh:
        markers = [r["marker"] for r in csv.DictReader(fh)]
    fig, ax = _new_axes(spec.style)
    colors = {"dilation": "tab:red", "translation": "tab:green",
              "": "tab:blue"}
    for idx, lam, mark in zip(data["index"], data["eigenvalue"], markers):
        ax.vlines(idx, 0, lam, color=colors.get(mark, "tab:blue"), lw=2)
        ax.plot([idx], [lam], "o", ms=5, color=colors.get(mark, "tab:blue"))
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("mode index")
    ax.set_ylabel("eigenvalue")
    ax.set_title("Second-variation spectrum")
    _save(fig, spec.out_path)
    return {"eigenvalues": data["eigenvalue"].tolist(), "markers": markers}


def _render_profile(spec: PlotSpec) -> dict:
    path = _find(spec)
    state = json.load(open(path))
    pts = np.asarray(state["points"], dtype=float)
    closed = np.vstack([pts, pts[:1]])
    fig, ax = _new_axes(spec.style)
    ax.plot(closed[:, 0], closed[:, 1], lw=1.5, color="tab:blue")
    if state.get("kind") == "revolution-surface":
        ax.axvline(0.0, color="k", lw=0.8, ls="--")
        ax.set_xlabel("r")
        ax.set_ylabel("z")
    else:
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.set_title(f"{state.get('kind', 'state')} profile "
                 f"({state.get('n_samples')} samples)")
    _save(fig, spec.out_path)
    return {"kind": state.get("kind"), "n_samples": state.get("n_samples")}


def _render_landscape(spec: PlotSpec) -> dict:
    path = _find(spec)
    data = _read_csv(path, ["c1", "f", "grad_norm"])
    fig, ax = _new_axes(spec.style)
    ax.plot(data["c1"], data["f"], lw=1.5, color="tab:blue")
    ax.set_xlabel("kernel coordinate")
    ax.set_ylabel("reduced Gaussian area")
    ax2 = ax.twinx()
    ax2.plot(data["c1"], data["grad_norm"], lw=1.0, ls="--",
             color="tab:orange")
    ax2.set_ylabel("|reduced gradient|")
    ax.set_title("Reduced landscape on the designated kernel")
    _save(fig, spec.out_path)
    return {"f_min": float(data["f"].min()), "f_max": float(data["f"].max())}


_RENDERERS = {
    "F-decay": _render_f_decay,
    "loglog-loja": _render_loglog,
    "orbit-distance": _render_orbit,
    "spectrum-stem": _render_spectrum,
    "profile-curve": _render_profile,
    "reduced-landscape": _render_landscape,
}
