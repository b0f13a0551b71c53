"""Conformal group action, orbit distance, and no-return experiments.

Group elements act on states by x -> a (R x + x0) with the scale applied
last.  For axisymmetric states the admissible subgroup is generated by
axis translations, dilations and the z-flip; anything else would leave
the representable class.  Distance to the group orbit of a base state is
an extrinsic symmetric mean-squared point-to-polyline distance minimized
over group parameters with a coarse seed grid plus Nelder-Mead, since
orbit elements need not be graphs over the base.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ._spectral import periodic_grid
from .errors import GraphOverflow, InvalidWindow, TimeRangeError
from .flow import (FlowOptions, FlowTrajectory, parabolic_dt,
                   resample_equal_arclength, run_curve_flow)
from .geometry import (KIND_CURVE, KIND_REVOLUTION, BaseShrinker,
                       ImmersedState, from_points)
from .graphs import _slots, _values, graph_points


# ---------------------------------------------------------------------------
# group elements
# ---------------------------------------------------------------------------

@dataclass
class GroupElement:
    """One element of the conformal linear group: rotation or flip,
    translation, and a positive scale applied last."""

    angle: float = 0.0             # plane curves
    flip: bool = False             # revolution states: z -> -z
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))
    scale: float = 1.0

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=float)
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.flip and self.angle != 0.0:
            raise ValueError("flip and rotation do not combine here")

    def matrix(self) -> np.ndarray:
        if self.flip:
            return np.array([[1.0, 0.0], [0.0, -1.0]])
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        return self.scale * (pts @ self.matrix().T + self.translation)

    def compose(self, other: "GroupElement") -> "GroupElement":
        """Element acting as self after other."""
        if self.flip or other.flip:
            if self.angle != 0.0 or other.angle != 0.0:
                raise ValueError("cannot mix flips with rotations")
            flip = self.flip != other.flip
            sz = -1.0 if self.flip else 1.0
            trans = np.array([other.translation[0],
                              sz * other.translation[1]])
            trans = trans + self.translation / other.scale
            return GroupElement(flip=flip, translation=trans,
                                scale=self.scale * other.scale)
        r1 = self.matrix()
        trans = r1 @ other.translation + self.translation / other.scale
        return GroupElement(angle=self.angle + other.angle, translation=trans,
                            scale=self.scale * other.scale)

    def inverse(self) -> "GroupElement":
        rt = self.matrix().T
        trans = -self.scale * (rt @ self.translation)
        if self.flip:
            return GroupElement(flip=True, translation=trans,
                                scale=1.0 / self.scale)
        return GroupElement(angle=-self.angle, translation=trans,
                            scale=1.0 / self.scale)

    @staticmethod
    def identity() -> "GroupElement":
        return GroupElement()


def apply_group(g: GroupElement, state):
    """Transform a state pointwise and recompute its cached geometry."""
    if isinstance(state, ImmersedState):
        return ImmersedState(surface=apply_group(g, state.surface),
                             t=state.t)
    if state.kind == KIND_REVOLUTION:
        if g.angle != 0.0:
            raise ValueError("axisymmetric states only admit the z-flip")
        if abs(g.translation[0]) > 0:
            raise ValueError("axisymmetric states only translate along the axis")
    return from_points(state.kind, g.apply_points(state.points))


def random_group_element(rng: np.random.Generator, kind: str,
                         max_log_scale: float = 0.5,
                         max_shift: float = 1.0) -> GroupElement:
    scale = float(np.exp(rng.uniform(-max_log_scale, max_log_scale)))
    if kind == KIND_CURVE:
        return GroupElement(angle=float(rng.uniform(0, 2 * np.pi)),
                            translation=rng.uniform(-max_shift, max_shift, 2),
                            scale=scale)
    return GroupElement(flip=bool(rng.integers(2)),
                        translation=np.array([0.0, rng.uniform(-max_shift, max_shift)]),
                        scale=scale)


# ---------------------------------------------------------------------------
# orbit distance
# ---------------------------------------------------------------------------

def _fold(points: np.ndarray, kind: str) -> np.ndarray:
    """Physical representative for distance purposes: meridian profiles
    use |r| so both copies of a doubled state coincide."""
    if kind == KIND_REVOLUTION:
        out = points.copy()
        out[:, 0] = np.abs(out[:, 0])
        return out
    return points


def _points_to_polyline_sq(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Squared distance from each point to a closed polyline."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    dd = np.maximum(np.sum(d ** 2, axis=1), 1e-300)
    diff = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.sum(diff * d[None, :, :], axis=2) / dd[None, :], 0.0, 1.0)
    proj = a[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.min(np.sum((pts[:, None, :] - proj) ** 2, axis=2), axis=1)


def _sym_distance(pts_a: np.ndarray, pts_b: np.ndarray) -> float:
    d_ab = _points_to_polyline_sq(pts_a, pts_b).mean()
    d_ba = _points_to_polyline_sq(pts_b, pts_a).mean()
    return float(np.sqrt(0.5 * (d_ab + d_ba)))


@dataclass
class OrbitFit:
    distance: float
    element: GroupElement
    converged: bool


def orbit_distance(state, base: BaseShrinker,
                   warm_start: Optional[GroupElement] = None,
                   max_points: int = 0,
                   xatol: float = 1e-9) -> OrbitFit:
    """Distance from a state to the group orbit of a base state.

    Minimizes the symmetric mean-squared point-to-polyline distance
    between the state and g(base) over the group parameters.  A coarse
    seed grid feeds Nelder-Mead refinement; non-convergence returns the
    best value found, flagged.
    """
    geom = state.surface if isinstance(state, ImmersedState) else state
    m_pts = _fold(np.asarray(geom.points, dtype=float), geom.kind)
    b_pts = _fold(np.asarray(base.points, dtype=float), base.kind)
    if max_points and m_pts.shape[0] > max_points:
        m_pts = m_pts[:: m_pts.shape[0] // max_points]
    if max_points and b_pts.shape[0] > max_points:
        b_pts = b_pts[:: b_pts.shape[0] // max_points]
    axisym = base.kind == KIND_REVOLUTION

    def transformed(params, flip):
        if axisym:
            log_a, tz = params
            r = np.array([[1.0, 0.0], [0.0, -1.0 if flip else 1.0]])
            t = np.array([0.0, tz])
        else:
            log_a, tx, ty, ang = params
            c, s = math.cos(ang), math.sin(ang)
            r = np.array([[c, -s], [s, c]])
            t = np.array([tx, ty])
        return math.exp(log_a) * (b_pts @ r.T + t)

    def objective(params, flip):
        return _sym_distance(m_pts, transformed(params, flip))

    # size/position seed from moments
    rms_m = float(np.sqrt((m_pts ** 2).sum(axis=1).mean()))
    rms_b = float(np.sqrt((b_pts ** 2).sum(axis=1).mean()))
    la0 = math.log(max(rms_m / max(rms_b, 1e-12), 1e-6))
    cen_m = m_pts.mean(axis=0)
    cen_b = b_pts.mean(axis=0)

    candidates = []
    if warm_start is not None:
        g0 = warm_start
        if axisym:
            candidates.append((np.array([math.log(g0.scale),
                                         g0.translation[1]]), g0.flip))
        else:
            candidates.append((np.array([math.log(g0.scale),
                                         g0.translation[0], g0.translation[1],
                                         g0.angle]), False))
    if axisym:
        for dla in (0.0, -0.2, 0.2):
            for flip in (False, True):
                a0 = math.exp(la0 + dla)
                tz = cen_m[1] / a0 - (-cen_b[1] if flip else cen_b[1])
                candidates.append((np.array([la0 + dla, tz]), flip))
    else:
        for ang in np.linspace(0.0, 2 * np.pi, 8, endpoint=False):
            c, s = math.cos(ang), math.sin(ang)
            r = np.array([[c, -s], [s, c]])
            t = cen_m / math.exp(la0) - r @ cen_b
            candidates.append((np.array([la0, t[0], t[1], ang]), False))

    best = None
    for params, flip in candidates:
        val = objective(params, flip)
        if best is None or val < best[0]:
            best = (val, params, flip)

    _, params0, flip0 = best
    res = minimize(lambda p: objective(p, flip0), params0,
                   method="Nelder-Mead",
                   options={"xatol": xatol, "fatol": 1e-14, "maxiter": 2000})
    params = res.x if res.fun <= best[0] else params0
    dist = float(min(res.fun, best[0]))
    if axisym:
        g_star = GroupElement(flip=flip0,
                              translation=np.array([0.0, params[1]]),
                              scale=math.exp(params[0]))
    else:
        g_star = GroupElement(angle=params[3],
                              translation=np.array([params[1], params[2]]),
                              scale=math.exp(params[0]))
    return OrbitFit(distance=dist, element=g_star,
                    converged=bool(res.success))


# ---------------------------------------------------------------------------
# comeback schedule and the renormalized flow
# ---------------------------------------------------------------------------

@dataclass
class ComebackSchedule:
    """Replay parameters turning a near-return into a nearly static flow.

    Derived from the window (T1, T2) and the matching scale b: the replay
    uses translation x0 = y0, center shift t0 = 1 - b^2 exp(-T2) and scale
    a = b, so its time t corresponds to flow time a^{-2}(t0 - exp(-t));
    t = 0 lands on -exp(-T2) and the left endpoint T_bar lands on
    -exp(-T1), exactly.
    """

    T1: float
    T2: float
    b: float
    y0: np.ndarray
    t0: float
    a: float
    T_bar: float

    def correspondence(self, t):
        return (self.t0 - np.exp(-np.asarray(t, dtype=float))) / self.a ** 2

    def identity_residuals(self) -> dict:
        at_zero = self.correspondence(0.0) - (-math.exp(-self.T2))
        at_tbar = self.correspondence(self.T_bar) - (-math.exp(-self.T1))
        return {"at_zero": float(at_zero), "at_tbar": float(at_tbar)}


def comeback_schedule(T1: float, T2: float, b: float,
                      y0=(0.0, 0.0), g: Optional[GroupElement] = None) -> ComebackSchedule:
    if not T1 < T2:
        raise InvalidWindow("need T1 < T2")
    if b <= 0:
        raise InvalidWindow("need b > 0")
    arg = 1.0 - b ** 2 * (math.exp(-T2) - math.exp(-T1))
    if arg <= 0.0:
        raise InvalidWindow("replay window undefined: log argument <= 0")
    t0 = 1.0 - b ** 2 * math.exp(-T2)
    return ComebackSchedule(T1=float(T1), T2=float(T2), b=float(b),
                            y0=np.asarray(y0, dtype=float), t0=float(t0),
                            a=float(b), T_bar=float(-math.log(arg)))


class StoredFlow:
    """Point-state snapshots of a rescaled flow, linearly interpolable."""

    def __init__(self, kind: str, times, states):
        self.kind = kind
        times = np.asarray(times, dtype=float)
        keep = np.concatenate([[True], np.diff(times) > 1e-15])
        self.times = times[keep]
        self.states = [np.asarray(s, dtype=float)
                       for s, k in zip(states, keep) if k]
        if self.times.size < 2:
            raise TimeRangeError("need at least two stored snapshots")
        if np.any(np.diff(self.times) <= 0):
            raise TimeRangeError("snapshot times must increase")

    @classmethod
    def from_trajectory(cls, traj: FlowTrajectory,
                        base: Optional[BaseShrinker] = None) -> "StoredFlow":
        times, states = [], []
        for snap in traj.snapshots:
            data = np.asarray(snap["data"])
            if snap["kind"] == "graph":
                if base is None:
                    raise TimeRangeError("graph snapshots need the base state")
                states.append(graph_points(base, data))
                times.append(snap["t"])
            else:
                states.append(data)
                times.append(snap["t"])
        kind = base.kind if base is not None else KIND_CURVE
        return cls(kind, times, states)

    def at(self, t: float) -> np.ndarray:
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
            raise TimeRangeError(
                f"time {t:.6g} outside stored range [{ts[0]:.6g}, {ts[-1]:.6g}]")
        i = int(np.clip(np.searchsorted(ts, t) - 1, 0, ts.size - 2))
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * self.states[i] + w * self.states[i + 1]


def renormalized_flow(source: StoredFlow, x0, t0: float, a: float,
                      times) -> FlowTrajectory:
    """Replay of a stored rescaled flow under the translation-dilation
    reparametrization; the result is again a rescaled flow up to the
    stored interpolation error."""
    x0 = np.asarray(x0, dtype=float)
    times = np.asarray(times, dtype=float)
    traj = FlowTrajectory(kind="points")
    n = source.states[0].shape[0]
    grid = periodic_grid(n)
    for t in times:
        tau = (t0 - math.exp(-t)) / a ** 2
        if tau >= 0.0:
            raise TimeRangeError(
                f"replay time {t:.6g} maps to nonnegative flow time {tau:.6g}")
        t_src = -math.log(-tau)
        pts_src = source.at(t_src)
        pts = a * math.exp(0.5 * t) * (math.exp(-0.5 * t_src) * pts_src + x0)
        f_val, g2 = _flow_diag(pts, source.kind, grid)
        traj.record(t, f_val, g2, np.nan, np.nan, np.nan)
        traj.snapshot(t, "points", pts)
    return traj


def _flow_diag(points, kind, grid):
    from .flow import _loop_diagnostics
    return _loop_diagnostics(points, kind, grid)


# ---------------------------------------------------------------------------
# no-return experiments
# ---------------------------------------------------------------------------

@dataclass
class NoReturnVerdict:
    verdict: str                   # NO_RETURN | RETURNED | NEVER_LEFT
    t_exit: Optional[float]
    t_return: Optional[float]
    min_dist_after_exit: Optional[float]
    terminated_early: bool
    termination: str
    distances: list                # (t, d) pairs
    delta1: float = np.nan
    delta2: float = np.nan

    def to_json(self) -> str:
        payload = {"verdict": self.verdict, "t_exit": self.t_exit,
                   "t_return": self.t_return,
                   "min_dist_after_exit": self.min_dist_after_exit,
                   "terminated_early": self.terminated_early,
                   "termination": self.termination,
                   "delta1": self.delta1, "delta2": self.delta2}
        return json.dumps(payload)


def classify_distances(times, dists, delta1: float, delta2: float,
                       terminated_early: bool, termination: str) -> NoReturnVerdict:
    t_exit = None
    t_return = None
    min_after = None
    for t, d in zip(times, dists):
        if t_exit is None:
            if d > delta2:
                t_exit = float(t)
                min_after = d
        else:
            min_after = min(min_after, d)
            if d < delta1 and t_return is None:
                t_return = float(t)
    if t_exit is None:
        verdict = "NEVER_LEFT"
    elif t_return is not None:
        verdict = "RETURNED"
    else:
        verdict = "NO_RETURN"
    return NoReturnVerdict(verdict=verdict, t_exit=t_exit, t_return=t_return,
                           min_dist_after_exit=(float(min_after)
                                                if min_after is not None else None),
                           terminated_early=terminated_early,
                           termination=termination,
                           distances=[(float(t), float(d))
                                      for t, d in zip(times, dists)],
                           delta1=float(delta1), delta2=float(delta2))


def no_return_experiment(base: BaseShrinker, perturbation, delta1: float,
                         delta2: float, horizon: float,
                         opts: Optional[FlowOptions] = None,
                         monitor_dt: float = 0.2,
                         monitor_points: int = 64) -> tuple:
    """Run one perturbed flow and classify whether it re-enters the
    delta1-orbit-neighborhood after leaving the delta2 one.

    The flow runs graphically while it can and falls back to the
    intrinsic loop flow afterwards (plain profiles and curves only).  A
    trajectory that terminates early far from the orbit cannot return and
    counts as no-return evidence, flagged ``terminated_early``.
    """
    if not delta1 < delta2:
        raise ValueError("need delta1 < delta2")
    opts = opts or FlowOptions()
    u0 = _values(base, perturbation)
    snaps = _graph_then_intrinsic(base, u0, horizon, opts, monitor_dt)
    times, dists = [], []
    warm = None
    for t_snap, pts in snaps["snapshots"]:
        if base.kind == KIND_REVOLUTION and pts[:, 0].min() <= 0:
            continue  # degenerate state at the very end of a collapse
        fit = orbit_distance(from_points(base.kind, pts), base,
                             warm_start=warm, max_points=monitor_points,
                             xatol=1e-7)
        warm = fit.element
        times.append(t_snap)
        dists.append(fit.distance)
    verdict = classify_distances(times, dists, delta1, delta2,
                                 snaps["terminated_early"],
                                 snaps["termination"])
    return verdict, snaps


def _graph_then_intrinsic(base, u0, horizon, opts, monitor_dt):
    """Graph flow with fast batched stepping until overflow, then the
    intrinsic loop flow; returns point snapshots every monitor_dt."""
    out = _run_graph_batch(base, u0[None, :], horizon, opts, monitor_dt)
    run = out[0]
    snapshots = run["snapshots"]
    termination = run["termination"]
    terminated_early = False
    if termination == "overflow" and run["t_end"] < horizon:
        if base.kind == KIND_REVOLUTION and base.doubled:
            terminated_early = True
            termination = "GraphOverflow"
        else:
            pts = graph_points(base, run["u_end"])
            pts = resample_equal_arclength(pts)
            sub_opts = FlowOptions(
                sigma=opts.sigma, tol=opts.tol, record_every=opts.record_every,
                snapshot_dt=monitor_dt, blowup_sup=opts.blowup_sup,
                axis_floor=opts.axis_floor, reparam_every=opts.reparam_every,
                intersection_every=opts.intersection_every,
                spacing_floor_frac=opts.spacing_floor_frac,
                dt_floor=opts.dt_floor)
            state = ImmersedState(from_points(base.kind, pts), t=run["t_end"])
            sub = run_curve_flow(state, horizon - run["t_end"], sub_opts)
            for snap in sub.snapshots:
                snapshots.append((snap["t"], np.asarray(snap["data"])))
            termination = sub.termination
            terminated_early = sub.termination not in ("horizon", "converged")
    elif termination == "blowup":
        terminated_early = True
    return {"snapshots": snapshots, "termination": termination,
            "terminated_early": terminated_early, "t_end": run["t_end"]}


def _run_graph_batch(base: BaseShrinker, u0_batch: np.ndarray, horizon: float,
                     opts: FlowOptions, monitor_dt: float) -> list:
    """RK4 graph flow on a batch of height fields over one base.

    Uses matmul derivatives (fast, equivariant only to rounding) since
    batches are statistical experiments; each run is deactivated when it
    leaves the graphical window and its last state is kept for handoff.
    """
    ev = _slots(base)
    grid = base.grid
    d1, d2 = grid.matrix_d1(), grid.matrix_d2()
    reach = opts.graph_frac * base.reach_estimate
    dt = parabolic_dt(base, opts)
    nb = u0_batch.shape[0]

    def m_of(u):
        return ev.m_of(u, u @ d1.T, u @ d2.T)

    state = u0_batch.copy()
    active = np.ones(nb, dtype=bool)
    t = 0.0
    results = [{"snapshots": [(0.0, graph_points(base, state[i]))],
                "termination": "horizon", "t_end": horizon,
                "u_end": state[i].copy()} for i in range(nb)]
    next_snap = monitor_dt
    while t < horizon - 1e-14 and active.any():
        dt_step = min(dt, horizon - t)
        u_act = state[active]
        k1 = m_of(u_act)
        k2 = m_of(u_act + 0.5 * dt_step * k1)
        k3 = m_of(u_act + 0.5 * dt_step * k2)
        k4 = m_of(u_act + dt_step * k3)
        state[active] = u_act + dt_step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt_step
        sup = np.abs(state).max(axis=1)
        grad_sup = np.abs((state @ d1.T) / base.g).max(axis=1)
        bad = active & ((sup >= reach) | (grad_sup > opts.grad_sup)
                        | ~np.isfinite(sup))
        for i in np.nonzero(bad)[0]:
            results[i]["termination"] = "overflow"
            results[i]["t_end"] = t
            results[i]["u_end"] = state[i].copy()
            results[i]["snapshots"].append((t, graph_points(base, state[i])))
        active &= ~bad
        if t + 1e-14 >= next_snap:
            for i in np.nonzero(active)[0]:
                results[i]["snapshots"].append((t, graph_points(base, state[i])))
            next_snap += monitor_dt
    for i in np.nonzero(active)[0]:
        results[i]["u_end"] = state[i].copy()
        results[i]["t_end"] = min(t, horizon)
        results[i]["snapshots"].append((t, graph_points(base, state[i])))
    return results
