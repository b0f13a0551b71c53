"""Quantitative inequality checks along flow trajectories.

Everything here treats trajectories as data: both sides of each
inequality are measured, constants are fitted and reported with their fit
windows, and assertions are about stability of the fits, never about the
non-constructive constants themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisFail, NotGraphical
from .flow import FlowTrajectory
from .geometry import BaseShrinker
from .graphs import graph_velocity_l1


@dataclass
class InequalityReport:
    name: str
    pairs: list = field(default_factory=list)       # (lhs, rhs) samples
    fitted: dict = field(default_factory=dict)
    violations: int = 0
    worst_ratio: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "fitted": self.fitted,
                "violations": self.violations,
                "worst_ratio": self.worst_ratio, "details": self.details}


# ---------------------------------------------------------------------------
# gradient inequality along trajectories
# ---------------------------------------------------------------------------

def lojasiewicz_check(traj: FlowTrajectory, f_limit: float,
                      beta: float = 0.5, floor: float = 1e-14) -> InequalityReport:
    """Check |F - F_limit|^{2-beta} <= (squared gradient norm) per step.

    Also fits the log-log slope of the F-gap against the squared gradient
    norm and reports the implied admissible range of the exponent, plus
    the largest F-gap threshold below which no violation occurs.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    f_vals = np.asarray(traj.F)
    g2 = np.asarray(traj.grad_norm2)
    gap = np.abs(f_vals - f_limit)
    live = (gap > floor) & (g2 > floor)
    lhs = gap[live] ** (2.0 - beta)
    rhs = g2[live]
    pairs = list(zip(lhs.tolist(), rhs.tolist()))
    viol_mask = lhs > rhs
    violations = int(viol_mask.sum())

    if violations:
        threshold = float(gap[live][viol_mask].min())
    else:
        threshold = float(gap[live].max()) if live.any() else float("inf")
    below = live.copy()
    below[live] = gap[live] < threshold
    viol_below = int((gap[below] ** (2.0 - beta) > g2[below]).sum())

    slope = tail_slope = np.nan
    if live.sum() >= 4:
        x = np.log(rhs)
        y = np.log(gap[live])
        slope, _ = np.polyfit(x, y, 1)
        # the asymptotic relation emerges on the tail, where the gap is small
        in_tail = gap[live] <= np.quantile(gap[live], 0.5)
        if in_tail.sum() >= 4:
            tail_slope, _ = np.polyfit(x[in_tail], y[in_tail], 1)
    beta_max = 2.0 - 1.0 / tail_slope if np.isfinite(tail_slope) else np.nan
    worst = float((lhs / np.maximum(rhs, 1e-300)).max()) if live.any() else 0.0
    return InequalityReport(
        name="lojasiewicz", pairs=pairs,
        fitted={"threshold": threshold, "loglog_slope": float(slope),
                "tail_slope": float(tail_slope),
                "beta_admissible_max": float(beta_max)},
        violations=violations, worst_ratio=worst,
        details={"beta": beta, "f_limit": f_limit,
                 "violations_below_threshold": viol_below,
                 "n_live": int(live.sum())})


# ---------------------------------------------------------------------------
# ODE decay bound
# ---------------------------------------------------------------------------

def decay_bound(g_end: float, beta: float, t, direction: str = "decreasing"):
    """Closed-form bound for nonnegative G with |G|^{2-beta} <= |G'|.

    decreasing: G(t) <= (G(0)^{beta-1} + (1-beta) t)^{-1/(1-beta)}
    increasing: G(t) <= (G(T)^{beta-1} + (1-beta) (T-t))^{-1/(1-beta)},
    where t is then interpreted as T - t_actual via the caller.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    if direction not in ("decreasing", "increasing"):
        raise ValueError("direction must be decreasing or increasing")
    if g_end <= 0.0:
        return np.zeros_like(t)
    return (g_end ** (beta - 1.0) + (1.0 - beta) * t) ** (-1.0 / (1.0 - beta))


def check_decay(times, series, beta: float) -> InequalityReport:
    """Verify the decay hypothesis discretely, then assert its conclusion.

    The hypothesis |G|^{2-beta} <= |G'| is tested with centered
    differences at interior nodes; HypothesisFail is raised if it does not
    hold there, and the closed-form bound is then checked pointwise
    against the matching endpoint value.
    """
    t = np.asarray(times, dtype=float)
    g = np.asarray(series, dtype=float)
    if np.any(g < 0):
        raise HypothesisFail("series must be non-negative")
    dg = (g[2:] - g[:-2]) / (t[2:] - t[:-2])
    hyp_lhs = g[1:-1] ** (2.0 - beta)
    bad = hyp_lhs > np.abs(dg) * (1.0 + 1e-9) + 1e-300
    if bad.any():
        raise HypothesisFail(
            f"discrete hypothesis fails at {int(bad.sum())} interior nodes")
    decreasing = g[-1] <= g[0]
    if decreasing:
        bound = decay_bound(g[0], beta, t - t[0], "decreasing")
    else:
        bound = decay_bound(g[-1], beta, t[-1] - t, "increasing")
    slack = bound - g
    violations = int((slack < -1e-12 * (1.0 + bound)).sum())
    worst = float((g / np.maximum(bound, 1e-300)).max())
    return InequalityReport(
        name="decay_bound",
        pairs=list(zip(g.tolist(), bound.tolist())),
        fitted={"direction": "decreasing" if decreasing else "increasing"},
        violations=violations, worst_ratio=worst,
        details={"beta": beta, "n": int(g.size)})


# ---------------------------------------------------------------------------
# geometric series bound
# ---------------------------------------------------------------------------

@dataclass
class SeriesBound:
    lhs_partial: float
    tail_estimate: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs_partial + self.tail_estimate <= self.rhs


def geometric_series_bound(beta: float, gamma: float, c1: float,
                           j_max: int = 200) -> SeriesBound:
    """Bound sum_j 2^{gamma j} (c1 + 2^{j+1})^{-1/(1-beta)} by the
    comparison integral 2 (2+c1)^{gamma - 1/(1-beta)} / (1/(1-beta) - gamma).

    The partial sum is majorized by a rigorous geometric tail.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    q = 1.0 / (1.0 - beta)
    if not 1.0 < gamma < q:
        raise ValueError("gamma must lie in (1, 1/(1-beta))")
    if c1 <= 0.0:
        raise ValueError("c1 must be positive")
    j = np.arange(1, j_max + 1, dtype=float)
    with np.errstate(over="ignore"):
        terms = np.exp(gamma * j * math.log(2.0)
                       - q * np.log(c1 + np.exp((j + 1) * math.log(2.0))))
    partial = float(terms.sum())
    rho = 2.0 ** (gamma - q)
    tail = (2.0 ** (-q)) * rho ** (j_max + 1) / (1.0 - rho)
    rhs = 2.0 * (2.0 + c1) ** (gamma - q) / (q - gamma)
    return SeriesBound(lhs_partial=partial, tail_estimate=float(tail),
                       rhs=float(rhs))


# ---------------------------------------------------------------------------
# weighted time-integral bound
# ---------------------------------------------------------------------------

def weighted_integral_check(traj: FlowTrajectory, gamma: float,
                            s_split: float, f_limit: float,
                            beta: float = 0.5,
                            n_prefixes: int = 4) -> InequalityReport:
    """Measure the r^gamma (and mirrored (T-r)^gamma) weighted integrals
    of the squared gradient norm and fit the constant of the bound
    C (F-drop)^{1 - gamma (1-beta)} over nested prefixes."""
    q = 1.0 / (1.0 - beta)
    if not 1.0 < gamma < q:
        raise ValueError("gamma must lie in (1, 1/(1-beta))")
    t = np.asarray(traj.times)
    f_vals = np.asarray(traj.F)
    g2 = np.asarray(traj.grad_norm2)
    power = 1.0 - gamma * (1.0 - beta)
    t_end = t[-1]

    front_cs, back_cs = [], []
    # prefixes walk back through the tail, where both sides have saturated
    offsets = np.linspace(1.2, 0.0, n_prefixes)
    for off in offsets:
        s_here = max(s_split - off, min(1.2, s_split))
        frac = 1.0 - off / max(t_end - t[0], 1e-300)
        mask = (t >= 1.0) & (t <= s_here)
        if mask.sum() >= 3:
            lhs = float(np.trapezoid((t[mask] ** gamma) * g2[mask], t[mask]))
            drop = f_vals[0] - np.interp(s_here, t, f_vals)
            if drop > 1e-15:
                front_cs.append(lhs / drop ** power)
        s_lo = s_split + (1.0 - frac) * (t_end - 1.0 - s_split)
        mask = (t >= s_lo) & (t <= t_end - 1.0)
        if mask.sum() >= 3 and s_split < t_end - 1.0:
            lhs = float(np.trapezoid(((t_end - t[mask]) ** gamma) * g2[mask],
                                     t[mask]))
            drop = np.interp(s_lo, t, f_vals) - f_vals[-1]
            if drop > 1e-15:
                back_cs.append(lhs / drop ** power)

    def stability(cs):
        cs = [c for c in cs if c > 0]
        if len(cs) < 2:
            return 1.0
        return max(cs) / min(cs)

    return InequalityReport(
        name="weighted_integral",
        fitted={"front_constants": front_cs, "back_constants": back_cs,
                "front_stability": stability(front_cs),
                "back_stability": stability(back_cs)},
        details={"gamma": gamma, "beta": beta, "power": power,
                 "s_split": s_split})


# ---------------------------------------------------------------------------
# drift bound
# ---------------------------------------------------------------------------

def _graph_snapshots(traj: FlowTrajectory):
    snaps = [(s["t"], np.asarray(s["data"])) for s in traj.snapshots
             if s["kind"] == "graph"]
    if len(snaps) < 2:
        raise NotGraphical("trajectory carries no graph snapshots")
    return snaps


def drift_bound_check(base: BaseShrinker, traj: FlowTrajectory,
                      t1: float, t2: float,
                      exponent: float = 0.25) -> InequalityReport:
    """Measure the integral of |u(t2) - u(t1)| over the base against the
    F-drop to the given power, and against the time-space L1 norm of the
    flow speed (the intermediate bound in the drift estimate)."""
    if t2 < t1:
        raise ValueError("need t1 <= t2")
    snaps = _graph_snapshots(traj)
    times = np.array([s[0] for s in snaps])
    if t1 < times[0] - 1e-9 or t2 > times[-1] + 1e-9:
        raise NotGraphical("window outside the graphical range")

    def u_at(tq):
        i = int(np.clip(np.searchsorted(times, tq) - 1, 0, times.size - 2))
        w = np.clip((tq - times[i]) / (times[i + 1] - times[i]), 0.0, 1.0)
        return (1.0 - w) * snaps[i][1] + w * snaps[i + 1][1]

    du = u_at(t2) - u_at(t1)
    lhs = float(base.area_w @ np.abs(du))

    inner = (times >= t1 - 1e-12) & (times <= t2 + 1e-12)
    ts = times[inner]
    vel = np.array([graph_velocity_l1(base, snaps[i][1])
                    for i in np.nonzero(inner)[0]])
    vel_l1 = float(np.trapezoid(vel, ts)) if ts.size >= 2 else 0.0

    f_traj = np.asarray(traj.F)
    t_traj = np.asarray(traj.times)
    f1 = float(np.interp(t1, t_traj, f_traj))
    f2 = float(np.interp(t2, t_traj, f_traj))
    drop = max(f1 - f2, 0.0)

    fitted_c = lhs / drop ** exponent if drop > 1e-300 else 0.0
    fitted_velc = lhs / vel_l1 if vel_l1 > 1e-300 else 0.0
    return InequalityReport(
        name="drift_bound",
        pairs=[(lhs, drop)],
        fitted={"C_vs_drop": fitted_c, "C_vs_velocity_l1": fitted_velc},
        details={"t1": t1, "t2": t2, "exponent": exponent,
                 "f_drop": drop, "velocity_l1": vel_l1, "lhs": lhs})


def drift_window_study(base: BaseShrinker, traj: FlowTrajectory,
                       windows, exponent: float = 0.25) -> dict:
    """Drift constants over nested windows plus the fitted exponent of
    log(lhs) against log(F-drop)."""
    rows = []
    for t1, t2 in windows:
        rep = drift_bound_check(base, traj, t1, t2, exponent)
        rows.append({"t1": t1, "t2": t2, **rep.details,
                     **{k: v for k, v in rep.fitted.items()}})
    lhs = np.array([r["lhs"] for r in rows])
    drop = np.array([r["f_drop"] for r in rows])
    ok = (lhs > 0) & (drop > 0)
    fit_exp = np.nan
    if ok.sum() >= 2:
        fit_exp, _ = np.polyfit(np.log(drop[ok]), np.log(lhs[ok]), 1)
    cs = [r["C_vs_drop"] for r in rows if r["C_vs_drop"] > 0]
    vcs = [r["C_vs_velocity_l1"] for r in rows if r["C_vs_velocity_l1"] > 0]
    return {"rows": rows, "fitted_exponent": float(fit_exp),
            "C_stability": (max(cs) / min(cs)) if len(cs) >= 2 else 1.0,
            "velC_stability": (max(vcs) / min(vcs)) if len(vcs) >= 2 else 1.0}
