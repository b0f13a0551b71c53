"""Time stepping for the rescaled flow.

Graphical runs evolve a height field over a fixed base by du/dt = M(u)
with explicit RK4 (default) or a semi-implicit splitting.  Intrinsic runs
evolve the sample points of a closed curve (or torus-like profile) by the
normal velocity (<x,n>/2 - H) n and resample to equal arclength with a
trigonometric interpolant, so the tangential reshuffling stays below
quadrature error.  Every accepted step records the Gaussian area, the
squared gradient norm, sup norms and the step size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._spectral import periodic_grid, trapezoid_weights
from .errors import AxisCollision, Blowup, GraphOverflow
from .geometry import (KIND_CURVE, KIND_REVOLUTION, BaseShrinker,
                       ImmersedState, from_points)
from .graphs import _slots, _values, second_variation_matrix


@dataclass
class FlowOptions:
    sigma: float = 0.2                # dt = sigma * h_min^2
    scheme: str = "rk4"               # rk4 | semi_implicit
    dt: Optional[float] = None        # overrides the parabolic formula
    tol: float = 1e-9                 # convergence: ||M u||_Q < tol
    graph_frac: float = 0.8           # abort graphs beyond this fraction of reach
    grad_sup: float = 2.0             # abort graphs beyond this sup |grad u|
    blowup_sup: float = 1e6
    record_every: int = 1
    snapshot_dt: Optional[float] = None
    reparam_every: int = 1            # intrinsic runs
    intersection_every: int = 10      # intrinsic runs
    axis_floor: float = 1e-2          # intrinsic revolution runs
    dt_floor: float = 1e-9            # intrinsic runs: stop when dt collapses
    spacing_floor_frac: float = 0.02  # intrinsic runs: stop when grid collapses


@dataclass
class FlowTrajectory:
    """Diagnostics time series plus sparse full-state snapshots."""

    kind: str
    times: list = dataclass_field(default_factory=list)
    F: list = dataclass_field(default_factory=list)
    grad_norm2: list = dataclass_field(default_factory=list)
    sup_u: list = dataclass_field(default_factory=list)
    sup_du: list = dataclass_field(default_factory=list)
    orbit_dist: list = dataclass_field(default_factory=list)
    dts: list = dataclass_field(default_factory=list)
    snapshots: list = dataclass_field(default_factory=list)
    events: list = dataclass_field(default_factory=list)
    termination: str = "horizon"

    def record(self, t, f_val, g2, sup_u, sup_du, dt, orbit=np.nan):
        self.times.append(float(t))
        self.F.append(float(f_val))
        self.grad_norm2.append(float(g2))
        self.sup_u.append(float(sup_u))
        self.sup_du.append(float(sup_du))
        self.orbit_dist.append(float(orbit))
        self.dts.append(float(dt))

    def snapshot(self, t, kind, data):
        self.snapshots.append({"t": float(t), "kind": kind,
                               "data": np.asarray(data).tolist()})

    def final_state(self):
        return self.snapshots[-1] if self.snapshots else None

    def to_csv(self) -> str:
        lines = ["t,F,grad_norm2,sup_u,sup_du,orbit_dist,dt"]
        for row in zip(self.times, self.F, self.grad_norm2, self.sup_u,
                       self.sup_du, self.orbit_dist, self.dts):
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"

    def save(self, csv_path, snapshots_path=None):
        with open(csv_path, "w") as fh:
            fh.write(self.to_csv())
        if snapshots_path is not None:
            payload = {"kind": self.kind, "termination": self.termination,
                       "events": self.events, "snapshots": self.snapshots}
            with open(snapshots_path, "w") as fh:
                json.dump(payload, fh)


def parabolic_dt(base: BaseShrinker, opts: FlowOptions) -> float:
    if opts.dt is not None:
        return float(opts.dt)
    h_min = float((base.g * base.grid.dtheta).min())
    return opts.sigma * h_min ** 2


# ---------------------------------------------------------------------------
# graphical stepping
# ---------------------------------------------------------------------------

def _m_of(base: BaseShrinker, u: np.ndarray) -> np.ndarray:
    grid = base.grid
    return _slots(base).m_of(u, grid.d1(u), grid.d2(u))


def step_graph(base: BaseShrinker, u, dt: float, scheme: str = "rk4",
               _semi_cache: Optional[dict] = None) -> np.ndarray:
    """One time step of du/dt = M(u).

    The semi-implicit scheme treats the second variation at u=0 implicitly
    and the nonlinear remainder explicitly (backward-Euler splitting).
    """
    u = _values(base, u)
    if dt <= 0:
        raise ValueError("dt must be positive")
    _guard_graph(base, u, reach_frac=1.0)
    if scheme == "rk4":
        k1 = _m_of(base, u)
        k2 = _m_of(base, u + 0.5 * dt * k1)
        k3 = _m_of(base, u + 0.5 * dt * k2)
        k4 = _m_of(base, u + dt * k3)
        return u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if scheme == "semi_implicit":
        cache = _semi_cache if _semi_cache is not None else {}
        key = (id(base), float(dt))
        if cache.get("key") != key:
            l0 = second_variation_matrix(base)
            cache["key"] = key
            cache["lu"] = lu_factor(np.eye(base.n_samples) - dt * l0)
            cache["l0"] = l0
        rhs = u + dt * (_m_of(base, u) - cache["l0"] @ u)
        return lu_solve(cache["lu"], rhs)
    raise ValueError(f"unknown scheme {scheme!r}")


def _guard_graph(base, u, reach_frac, grad_sup=None, grid=None):
    sup = np.abs(u).max()
    if not np.isfinite(sup):
        raise Blowup("graph field is not finite")
    if sup >= reach_frac * base.reach_estimate:
        raise GraphOverflow(
            f"sup|u| = {sup:.4g} beyond {reach_frac:.2f} * reach")
    if grad_sup is not None:
        g = grid if grid is not None else base.grid
        du = np.abs(g.d1(u) / base.g).max()
        if du > grad_sup:
            raise GraphOverflow(f"sup|grad u| = {du:.4g} beyond {grad_sup}")


def run_graph_flow(base: BaseShrinker, u0, horizon: float,
                   opts: Optional[FlowOptions] = None) -> FlowTrajectory:
    """Evolve the graph flow until the horizon, convergence, or failure."""
    opts = opts or FlowOptions()
    u = _values(base, u0).copy()
    grid = base.grid
    ev = _slots(base)
    dt = parabolic_dt(base, opts)
    qw = base.area_w * base.weight
    traj = FlowTrajectory(kind="graph")

    def diagnostics(t, u, dt_used):
        s, ut, utt = u, grid.d1(u), grid.d2(u)
        nu, w, _, _, _, m_op, _ = ev.all(s, ut, utt)
        y = base.points + u[:, None] * base.normal
        wgt = np.exp(-0.25 * np.sum(y ** 2, axis=1))
        f_val = base.area_w @ (nu * wgt)
        g2 = base.area_w @ (nu * wgt * (m_op / w) ** 2)
        m_q = np.sqrt(max(qw @ (m_op ** 2), 0.0))
        traj.record(t, f_val, g2, np.abs(u).max(),
                    np.abs(ut / base.g).max(), dt_used)
        return m_q

    t = 0.0
    step_idx = 0
    next_snap = 0.0
    semi_cache: dict = {}
    m_q = diagnostics(t, u, dt)
    if opts.snapshot_dt is not None:
        traj.snapshot(t, "graph", u)
        next_snap = opts.snapshot_dt
    if m_q < opts.tol:
        traj.termination = "converged"
        traj.snapshot(t, "graph", u)
        return traj

    while t < horizon - 1e-14:
        dt_step = min(dt, horizon - t)
        try:
            u_new = step_graph(base, u, dt_step, opts.scheme, semi_cache)
            _guard_graph(base, u_new, opts.graph_frac, opts.grad_sup, grid)
        except GraphOverflow as exc:
            traj.termination = "GraphOverflow"
            traj.events.append({"t": t, "event": "GraphOverflow",
                                "detail": str(exc)})
            traj.snapshot(t, "graph", u)
            return traj
        except Blowup as exc:
            traj.termination = "blowup"
            traj.events.append({"t": t, "event": "blowup", "detail": str(exc)})
            return traj
        if np.abs(u_new).max() > opts.blowup_sup:
            traj.termination = "blowup"
            traj.events.append({"t": t, "event": "blowup",
                                "detail": "sup norm exceeded threshold"})
            return traj
        u = u_new
        t += dt_step
        step_idx += 1
        if step_idx % opts.record_every == 0 or t >= horizon - 1e-14:
            m_q = diagnostics(t, u, dt_step)
            if m_q < opts.tol:
                traj.termination = "converged"
                traj.snapshot(t, "graph", u)
                return traj
        if opts.snapshot_dt is not None and t + 1e-14 >= next_snap:
            traj.snapshot(t, "graph", u)
            next_snap += opts.snapshot_dt
    traj.termination = "horizon"
    traj.snapshot(t, "graph", u)
    return traj

# ---------------------------------------------------------------------------
# intrinsic stepping
# ---------------------------------------------------------------------------

def _light_geometry(points: np.ndarray, kind: str, grid):
    """Velocity-grade geometry of a sampled loop, without reach or Fejer
    machinery (intrinsic runs only handle plain loops)."""
    dp = grid.d1m(points.T).T
    dpp = grid.d2m(points.T).T
    xp, xpp = dp, dpp
    g = np.sqrt(np.sum(xp ** 2, axis=1))
    tangent = xp / g[:, None]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    kappa = (xp[:, 0] * xpp[:, 1] - xp[:, 1] * xpp[:, 0]) / g ** 3
    h_mean = kappa.copy()
    if kind == KIND_REVOLUTION:
        h_mean = h_mean + normal[:, 0] / points[:, 0]
    xdotn = np.sum(points * normal, axis=1)
    return g, tangent, normal, h_mean, xdotn


def _velocity(points: np.ndarray, kind: str, grid) -> np.ndarray:
    g, tangent, normal, h_mean, xdotn = _light_geometry(points, kind, grid)
    speed = 0.5 * xdotn - h_mean
    return speed[:, None] * normal


def _loop_diagnostics(points: np.ndarray, kind: str, grid):
    g, tangent, normal, h_mean, xdotn = _light_geometry(points, kind, grid)
    wgt = np.exp(-0.25 * np.sum(points ** 2, axis=1))
    aw = g * trapezoid_weights(points.shape[0])
    if kind == KIND_REVOLUTION:
        aw = aw * 2.0 * np.pi * points[:, 0]
    res = h_mean - 0.5 * xdotn
    f_val = float(aw @ wgt)
    g2 = float(aw @ (res ** 2 * wgt))
    return f_val, g2


def _trig_coeffs(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft(values)


def _phase_matrix(n_modes: int, theta: np.ndarray) -> np.ndarray:
    """exp(i k theta) for k = 0..n_modes-1, built by cumulative products
    (one complex exp per sample instead of one per entry)."""
    z = np.exp(1j * theta)
    phase = np.empty((n_modes, theta.shape[0]), dtype=complex)
    phase[0] = 1.0
    if n_modes > 1:
        phase[1:] = z
        np.cumprod(phase[1:], axis=0, out=phase[1:])
    return phase


def _trig_eval_multi(coeff_rows: np.ndarray, n: int, theta: np.ndarray,
                     phase: np.ndarray = None) -> np.ndarray:
    """Evaluate several trigonometric interpolants (rows of rfft output)
    at arbitrary parameters, sharing one phase matrix."""
    coeff_rows = np.atleast_2d(coeff_rows)
    n_modes = coeff_rows.shape[1]
    if phase is None:
        phase = _phase_matrix(n_modes, theta)
    scale = np.full(n_modes, 2.0)
    scale[0] = 1.0
    if n % 2 == 0:
        scale[-1] = 1.0
    return ((coeff_rows * scale) @ phase).real / n


def _trig_eval(coeffs: np.ndarray, n: int, theta: np.ndarray) -> np.ndarray:
    return _trig_eval_multi(coeffs[None, :], n, theta)[0]


def resample_equal_arclength(points: np.ndarray, theta0=None,
                             return_theta: bool = False):
    """Resample a smooth closed loop to equal arclength spacing.

    Uses the trigonometric interpolant of the samples, the spectral
    antiderivative of the parameter speed, and warm-started Newton sweeps
    for the inverse arclength map, so resampled points sit on the
    interpolated curve to spectral accuracy (pure tangential motion).
    An exponential filter removes the near-Nyquist band of the
    interpolant: for a resolved curve that band sits at roundoff, but it
    is the aliasing channel through which a tangential grid oscillation
    can masquerade as curvature.
    """
    n = points.shape[0]
    grid = periodic_grid(n)
    cx, cy = _trig_coeffs(points[:, 0]), _trig_coeffs(points[:, 1])
    k = np.arange(cx.shape[0])
    filt = np.exp(-36.0 * (k / k[-1]) ** 36)
    cx = cx * filt
    cy = cy * filt

    g_nodes = np.sqrt(grid.d1m(points[:, 0]) ** 2 + grid.d1m(points[:, 1]) ** 2)
    cg = _trig_coeffs(g_nodes)
    g_mean = cg[0].real / n
    # antiderivative of (g - mean): divide nonzero modes by ik
    ci = np.zeros_like(cg)
    ci[1:] = cg[1:] / (1j * k[1:])
    if n % 2 == 0:
        ci[-1] = 0.0
    length = 2.0 * np.pi * g_mean
    s_origin = _trig_eval(ci, n, np.zeros(1))[0]
    pair = np.stack([ci, cg])

    theta = (np.arange(n) * 2.0 * np.pi / n) if theta0 is None else theta0.copy()
    targets = np.arange(n) * length / n
    for _ in range(12):
        vals = _trig_eval_multi(pair, n, theta)
        err = g_mean * theta + vals[0] - s_origin - targets
        theta = theta - err / np.maximum(vals[1], 1e-12)
        if np.abs(err).max() < 1e-11 * max(length, 1.0):
            break
    xy = _trig_eval_multi(np.stack([cx, cy]), n, theta)
    out = np.stack([xy[0], xy[1]], axis=1)
    if return_theta:
        return out, theta
    return out


def _segments_intersect(points: np.ndarray) -> bool:
    """Any crossing among non-adjacent segments of the closed polyline."""
    n = points.shape[0]
    a = points
    b = np.roll(points, -1, axis=0)
    d = b - a

    def cross(v, w):
        return v[..., 0] * w[..., 1] - v[..., 1] * w[..., 0]

    ai = a[:, None, :]
    di = d[:, None, :]
    aj = a[None, :, :]
    dj = d[None, :, :]
    denom = cross(di, dj)
    diff = aj - ai
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(diff, dj) / denom
        s = cross(diff, di) / denom
    hit = (np.abs(denom) > 1e-14) & (t > 1e-10) & (t < 1 - 1e-10) \
        & (s > 1e-10) & (s < 1 - 1e-10)
    idx = np.arange(n)
    sep = np.abs(idx[:, None] - idx[None, :])
    sep = np.minimum(sep, n - sep)
    hit &= sep > 1
    return bool(hit.any())


def _min_spacing(points: np.ndarray, grid) -> float:
    g = np.sqrt(grid.d1m(points[:, 0]) ** 2 + grid.d1m(points[:, 1]) ** 2)
    return float((g * grid.dtheta).min())


def run_curve_flow(state0, horizon: float,
                   opts: Optional[FlowOptions] = None) -> FlowTrajectory:
    """Evolve sample points of a closed loop by the rescaled normal
    velocity, resampling to equal arclength after each step."""
    opts = opts or FlowOptions()
    if isinstance(state0, ImmersedState):
        kind, points, t = state0.kind, state0.points.copy(), state0.t
    elif isinstance(state0, BaseShrinker):
        kind, points, t = state0.kind, state0.points.copy(), 0.0
    else:
        kind, points, t = KIND_CURVE, np.asarray(state0, dtype=float).copy(), 0.0
    if kind == KIND_REVOLUTION and points[:, 0].min() <= 0:
        raise AxisCollision("intrinsic runs need profiles away from the axis")
    n = points.shape[0]
    grid = periodic_grid(n)
    traj = FlowTrajectory(kind="points")
    next_snap = t

    def record(t, points, dt_used):
        f_val, g2 = _loop_diagnostics(points, kind, grid)
        traj.record(t, f_val, g2, np.nan, np.nan, dt_used)
        return g2

    def current_dt(points):
        if opts.dt is not None:
            return opts.dt
        return opts.sigma * _min_spacing(points, grid) ** 2

    spacing_floor = opts.spacing_floor_frac * _min_spacing(points, grid)
    warm_theta = None
    g2 = record(t, points, current_dt(points))
    if opts.snapshot_dt is not None:
        traj.snapshot(t, "points", points)
        next_snap = t + opts.snapshot_dt
    step_idx = 0
    t_end = t + horizon
    while t < t_end - 1e-14:
        dt_step = min(current_dt(points), t_end - t)
        if dt_step < opts.dt_floor or _min_spacing(points, grid) < spacing_floor:
            traj.termination = "blowup"
            traj.events.append({"t": t, "event": "blowup",
                                "detail": "grid collapse near singularity"})
            traj.snapshot(t, "points", points)
            return traj
        prev_points = points
        k1 = _velocity(points, kind, grid)
        k2 = _velocity(points + 0.5 * dt_step * k1, kind, grid)
        k3 = _velocity(points + 0.5 * dt_step * k2, kind, grid)
        k4 = _velocity(points + dt_step * k3, kind, grid)
        points = points + dt_step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt_step
        step_idx += 1

        if not np.all(np.isfinite(points)) or np.abs(points).max() > opts.blowup_sup:
            traj.termination = "blowup"
            traj.events.append({"t": t, "event": "blowup",
                                "detail": "points not finite"})
            return traj
        if kind == KIND_REVOLUTION and points[:, 0].min() < opts.axis_floor:
            traj.termination = "axis_collision"
            traj.events.append({"t": t, "event": "axis_collision",
                                "detail": f"min r < {opts.axis_floor}"})
            # the final step may overshoot the axis; keep the last state
            # that is still a valid profile
            traj.snapshot(t - dt_step, "points", prev_points)
            return traj
        if step_idx % opts.reparam_every == 0:
            points, warm_theta = resample_equal_arclength(
                points, theta0=warm_theta, return_theta=True)
        if step_idx % opts.intersection_every == 0 and _segments_intersect(points):
            traj.termination = "self_intersection"
            traj.events.append({"t": t, "event": "self_intersection"})
            traj.snapshot(t, "points", points)
            return traj
        if step_idx % opts.record_every == 0 or t >= t_end - 1e-14:
            g2 = record(t, points, dt_step)
            if g2 < opts.tol ** 2:
                traj.termination = "converged"
                traj.snapshot(t, "points", points)
                return traj
        if opts.snapshot_dt is not None and t + 1e-14 >= next_snap:
            traj.snapshot(t, "points", points)
            next_snap += opts.snapshot_dt
    traj.termination = "horizon"
    traj.snapshot(t, "points", points)
    return traj


def gradient_identity_residual(traj: FlowTrajectory) -> np.ndarray:
    """Relative residual of dF/dt = -(squared gradient norm) at interior
    steps, by centered differences of the recorded F series."""
    t = np.asarray(traj.times)
    f_vals = np.asarray(traj.F)
    g2 = np.asarray(traj.grad_norm2)
    if t.size < 3:
        raise ValueError("need at least 3 recorded steps")
    dfdt = (f_vals[2:] - f_vals[:-2]) / (t[2:] - t[:-2])
    mism = dfdt + g2[1:-1]
    out = np.zeros_like(mism)
    tiny = (np.abs(dfdt) < 1e-12) & (g2[1:-1] < 1e-12)
    denom = np.maximum(g2[1:-1], 1e-300)
    out = np.where(tiny, 0.0, np.abs(mism) / denom)
    return out
