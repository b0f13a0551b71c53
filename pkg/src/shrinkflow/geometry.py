"""Sampled closed hypersurfaces and their Gaussian-weighted geometry.

Two kinds of states are supported:

* ``curve-in-plane`` -- a closed plane curve sampled on a uniform periodic
  parameter grid.
* ``revolution-surface`` -- an axisymmetric surface described by its
  meridian profile in the (r, z) half-plane.  Profiles that stay away from
  the axis (torus-like) are stored as a closed loop with r > 0.  Profiles
  that meet the axis (sphere-like) are stored as the *doubled* meridian:
  the full great-circle-like curve through both poles, sampled on a
  cell-centered periodic grid so no sample sits on the axis.  Each physical
  point then appears twice and all cached fields are even under the mirror
  map j -> n-1-j.

Sign conventions: samples are oriented counterclockwise in their plane and
the unit normal is the tangent rotated by -90 degrees, which points
outward; with H = div(n) this makes H = dim/R on round spheres, so circles
of radius sqrt(2) and 2-spheres of radius 2 satisfy H = <x,n>/2 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ._spectral import fejer1_weights, periodic_grid, trapezoid_weights
from .errors import ConfigError

KIND_CURVE = "curve-in-plane"
KIND_REVOLUTION = "revolution-surface"


# ---------------------------------------------------------------------------
# core sampled state
# ---------------------------------------------------------------------------

@dataclass
class BaseShrinker:
    """A sampled closed hypersurface with cached pointwise geometry.

    Despite the name this class represents arbitrary sampled states (the
    flow engine evolves them); ``shrinker_residual`` measures how far the
    state is from satisfying H = <x,n>/2.

    Cached per-sample arrays (all shape (n,)):
      tangent, normal     unit meridian tangent/outward normal (n, 2)
      g                   |dP/dtheta|, the parameter speed
      gtheta              d(g)/dtheta
      kappa               curvature of the sampled plane curve
      kappa2              azimuthal principal curvature (0 for curves)
      H, A2               mean curvature and |A|^2
      xdotn, xdott        <p, normal>, <p, tangent>
      weight              exp(-|p|^2 / 4)
      area_w              quadrature weights for integrals over the surface
      s                   cumulative arclength of the sampled curve
    """

    kind: str
    points: np.ndarray
    doubled: bool = False
    tangent: np.ndarray = field(default=None, repr=False)
    normal: np.ndarray = field(default=None, repr=False)
    g: np.ndarray = field(default=None, repr=False)
    gtheta: np.ndarray = field(default=None, repr=False)
    kappa: np.ndarray = field(default=None, repr=False)
    kappa2: np.ndarray = field(default=None, repr=False)
    H: np.ndarray = field(default=None, repr=False)
    A2: np.ndarray = field(default=None, repr=False)
    xdotn: np.ndarray = field(default=None, repr=False)
    xdott: np.ndarray = field(default=None, repr=False)
    weight: np.ndarray = field(default=None, repr=False)
    area_w: np.ndarray = field(default=None, repr=False)
    s: np.ndarray = field(default=None, repr=False)
    reach_estimate: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    @property
    def grid(self):
        return periodic_grid(self.n_samples)

    @property
    def ambient_dim(self) -> int:
        return 2 if self.kind == KIND_CURVE else 3

    @property
    def hypersurface_dim(self) -> int:
        return self.ambient_dim - 1

    def shrinker_residual(self) -> np.ndarray:
        return self.H - 0.5 * self.xdotn

    def mirror_index(self) -> np.ndarray:
        """Index map pairing doubled meridian samples with their mirror copy."""
        n = self.n_samples
        return n - 1 - np.arange(n)

    def copy(self) -> "BaseShrinker":
        return from_points(self.kind, self.points.copy())


def _orient_ccw(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area2 < 0.0:
        return points[::-1].copy()
    return points


def _bottleneck_reach(points: np.ndarray, s: np.ndarray, length: float) -> float:
    """Half the smallest euclidean gap between samples that are far apart
    along the curve (euclid < 0.5 * arc distance)."""
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    ds = np.abs(s[:, None] - s[None, :])
    ds = np.minimum(ds, length - ds)
    euclid = np.sqrt(d2)
    mask = euclid < 0.5 * ds
    if not mask.any():
        return np.inf
    return 0.5 * euclid[mask].min()


def from_points(kind: str, points: np.ndarray) -> BaseShrinker:
    """Build a state with all cached geometry computed from the samples."""
    points = np.asarray(points, dtype=float)
    if kind not in (KIND_CURVE, KIND_REVOLUTION):
        raise ConfigError(f"unknown state kind {kind!r}")
    if points.ndim != 2 or points.shape[1] != 2:
        raise ConfigError("points must have shape (n, 2)")
    n = points.shape[0]
    if n < 16 or n % 2 != 0:
        raise ConfigError("need an even number of samples, at least 16")
    points = _orient_ccw(points)
    x = points[:, 0]
    doubled = bool(kind == KIND_REVOLUTION and x.min() < 0.0 < x.max())
    if kind == KIND_REVOLUTION and not doubled and x.min() <= 0.0:
        raise ConfigError("revolution profile loops must stay in r > 0")
    if doubled:
        # doubled meridians must pair each sample with its mirror copy so
        # the pole-aware quadrature applies
        mirror = points[::-1]
        scale = np.abs(points).max()
        if (np.abs(mirror[:, 0] + x).max() > 1e-6 * scale
                or np.abs(mirror[:, 1] - points[:, 1]).max() > 1e-6 * scale):
            raise ConfigError(
                "axis-crossing profiles must be mirror-symmetric doubled "
                "meridians on the cell-centered grid")

    state = BaseShrinker(kind=kind, points=points, doubled=doubled)
    _compute_geometry(state)
    return state


def _compute_geometry(state: BaseShrinker) -> None:
    grid = state.grid
    pts = state.points
    n = state.n_samples
    xp = np.stack([grid.d1(pts[:, 0]), grid.d1(pts[:, 1])], axis=1)
    xpp = np.stack([grid.d2(pts[:, 0]), grid.d2(pts[:, 1])], axis=1)
    g = np.sqrt(np.sum(xp ** 2, axis=1))
    tangent = xp / g[:, None]
    normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
    kappa = (xp[:, 0] * xpp[:, 1] - xp[:, 1] * xpp[:, 0]) / g ** 3

    state.tangent = tangent
    state.normal = normal
    state.g = g
    state.gtheta = grid.d1(g)
    state.kappa = kappa
    state.xdotn = np.sum(pts * normal, axis=1)
    state.xdott = np.sum(pts * tangent, axis=1)
    state.weight = np.exp(-0.25 * np.sum(pts ** 2, axis=1))

    dtheta = grid.dtheta
    s = np.concatenate([[0.0], np.cumsum(0.5 * (g[:-1] + g[1:]) * dtheta)])
    length = s[-1] + 0.5 * (g[-1] + g[0]) * dtheta
    state.s = s[:n]

    if state.kind == KIND_CURVE:
        state.kappa2 = np.zeros(n)
        state.H = kappa
        state.A2 = kappa ** 2
        state.area_w = g * trapezoid_weights(n)
    else:
        x = pts[:, 0]
        kappa2 = normal[:, 0] / x
        state.kappa2 = kappa2
        state.H = kappa + kappa2
        state.A2 = kappa ** 2 + kappa2 ** 2
        if state.doubled:
            half = n // 2
            phi = (np.arange(n) + 0.5) * dtheta
            v = fejer1_weights(half)
            jhat = np.where(np.arange(n) < half, np.arange(n), n - 1 - np.arange(n))
            state.area_w = v[jhat] * np.pi * np.abs(x) * g / np.abs(np.sin(phi))
        else:
            state.area_w = 2.0 * np.pi * x * g * trapezoid_weights(n)

    reach = _bottleneck_reach(state.points, state.s, length)
    amax = np.sqrt(state.A2.max())
    if amax > 0:
        reach = min(reach, 1.0 / amax)
    state.reach_estimate = float(reach)


# ---------------------------------------------------------------------------
# canonical shrinkers
# ---------------------------------------------------------------------------

def build_circle(radius: float, n_samples: int) -> BaseShrinker:
    """Circle of the given radius centered at the origin.

    Cached geometry is filled from the closed forms of the round circle
    (constant speed and curvature), which keeps the caches exactly
    shift-invariant on the grid; the generic pipeline reproduces them to
    spectral accuracy (tested).
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")
    if n_samples < 16:
        raise ConfigError("circle needs at least 16 samples")
    if n_samples % 2 != 0:
        raise ConfigError("sample count must be even")
    n = n_samples
    theta = np.arange(n) * 2.0 * np.pi / n
    ct, st = np.cos(theta), np.sin(theta)
    pts = radius * np.stack([ct, st], axis=1)

    state = BaseShrinker(kind=KIND_CURVE, points=pts, doubled=False)
    state.tangent = np.stack([-st, ct], axis=1)
    state.normal = np.stack([ct, st], axis=1)
    state.g = np.full(n, radius)
    state.gtheta = np.zeros(n)
    state.kappa = np.full(n, 1.0 / radius)
    state.kappa2 = np.zeros(n)
    state.H = np.full(n, 1.0 / radius)
    state.A2 = np.full(n, 1.0 / radius ** 2)
    state.xdotn = np.full(n, radius)
    state.xdott = np.zeros(n)
    state.weight = np.full(n, np.exp(-0.25 * radius ** 2))
    state.area_w = np.full(n, radius * 2.0 * np.pi / n)
    state.s = theta * radius
    state.reach_estimate = radius
    return state


def build_sphere(radius: float, n_samples: int) -> BaseShrinker:
    """Round 2-sphere as a doubled-meridian revolution state.

    ``n_samples`` counts the doubled meridian samples; the physical
    half-meridian carries n_samples/2 of them, cell-centered in polar
    angle so that no sample lies on the axis.
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")
    if n_samples < 32:
        raise ConfigError("sphere needs at least 32 samples")
    if n_samples % 2 != 0:
        raise ConfigError("sample count must be even")
    n = n_samples
    phi = (np.arange(n) + 0.5) * 2.0 * np.pi / n  # 0 = south pole
    spt, cpt = np.sin(phi), np.cos(phi)
    pts = radius * np.stack([spt, -cpt], axis=1)

    state = BaseShrinker(kind=KIND_REVOLUTION, points=pts, doubled=True)
    state.tangent = np.stack([cpt, spt], axis=1)
    state.normal = np.stack([spt, -cpt], axis=1)
    state.g = np.full(n, radius)
    state.gtheta = np.zeros(n)
    state.kappa = np.full(n, 1.0 / radius)
    state.kappa2 = np.full(n, 1.0 / radius)
    state.H = np.full(n, 2.0 / radius)
    state.A2 = np.full(n, 2.0 / radius ** 2)
    state.xdotn = np.full(n, radius)
    state.xdott = np.zeros(n)
    state.weight = np.full(n, np.exp(-0.25 * radius ** 2))
    half = n // 2
    v = fejer1_weights(half)
    jhat = np.where(np.arange(n) < half, np.arange(n), n - 1 - np.arange(n))
    state.area_w = np.pi * radius ** 2 * v[jhat]
    state.s = phi * radius
    state.reach_estimate = radius / np.sqrt(2.0)
    return state


def build_ellipse(a: float, b: float, n_samples: int) -> BaseShrinker:
    """Ellipse with semi-axes (a, b), sampled uniformly in the angle parameter."""
    if a <= 0 or b <= 0:
        raise ConfigError("semi-axes must be positive")
    theta = np.arange(n_samples) * 2.0 * np.pi / n_samples
    pts = np.stack([a * np.cos(theta), b * np.sin(theta)], axis=1)
    return from_points(KIND_CURVE, pts)


@dataclass
class ImmersedState:
    """An arbitrary evolving closed state with its rescaled-flow time stamp."""

    surface: BaseShrinker
    t: float = 0.0

    @property
    def kind(self) -> str:
        return self.surface.kind

    @property
    def points(self) -> np.ndarray:
        return self.surface.points


def _geom(state) -> BaseShrinker:
    if isinstance(state, ImmersedState):
        return state.surface
    return state


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def gaussian_area(state) -> float:
    """Gaussian-weighted area integral exp(-|x|^2/4) over the hypersurface."""
    geom = _geom(state)
    return float(geom.area_w @ geom.weight)


def gradient_norm2(state) -> float:
    """Integral of |H - <x,n>/2|^2 exp(-|x|^2/4), the squared flow speed."""
    geom = _geom(state)
    res = geom.shrinker_residual()
    return float(geom.area_w @ (res ** 2 * geom.weight))


def scaled_translated_area(state, t0: float, x0: np.ndarray) -> float:
    """Gaussian area of t0 * M + x0 without rebuilding any geometry."""
    geom = _geom(state)
    x0 = np.asarray(x0, dtype=float)
    pts = t0 * geom.points + x0[None, :]
    w = np.exp(-0.25 * np.sum(pts ** 2, axis=1))
    return float(t0 ** geom.hypersurface_dim * (geom.area_w @ w))


@dataclass
class EntropySearchConfig:
    log_t0_bounds: tuple = (-3.0, 3.0)
    x0_bound: float = 5.0
    coarse: int = 11
    xatol: float = 1e-8
    fatol: float = 1e-12
    maxiter: int = 4000


@dataclass
class EntropyResult:
    value: float
    t0: float
    x0: np.ndarray
    converged: bool


def entropy(state, search: Optional[EntropySearchConfig] = None) -> EntropyResult:
    """Supremum of the Gaussian area over scalings and translations.

    For axisymmetric states only translations along the axis are admissible
    (anything else breaks the symmetry the sampling can represent).  The
    search is a coarse grid followed by Nelder-Mead refinement; when the
    refinement does not converge the best value found is returned flagged.
    """
    geom = _geom(state)
    cfg = search or EntropySearchConfig()
    axisym = geom.kind == KIND_REVOLUTION

    def objective(params):
        log_t0 = params[0]
        if axisym:
            x0 = np.array([0.0, params[1]])
        else:
            x0 = np.array([params[1], params[2]])
        return -scaled_translated_area(geom, np.exp(log_t0), x0)

    lo, hi = cfg.log_t0_bounds
    log_ts = np.linspace(lo, hi, cfg.coarse)
    shifts = np.linspace(-cfg.x0_bound, cfg.x0_bound, cfg.coarse)
    best, best_p = np.inf, None
    if axisym:
        for lt in log_ts:
            for z0 in shifts:
                val = objective((lt, z0))
                if val < best:
                    best, best_p = val, np.array([lt, z0])
    else:
        for lt in log_ts:
            for ax in shifts:
                for ay in shifts:
                    val = objective((lt, ax, ay))
                    if val < best:
                        best, best_p = val, np.array([lt, ax, ay])

    res = minimize(objective, best_p, method="Nelder-Mead",
                   options={"xatol": cfg.xatol, "fatol": cfg.fatol,
                            "maxiter": cfg.maxiter})
    params = res.x if res.fun <= best else best_p
    value = -min(res.fun, best)
    t0 = float(np.exp(params[0]))
    if axisym:
        x0 = np.array([0.0, params[1]])
    else:
        x0 = np.array([params[1], params[2]])
    return EntropyResult(value=value, t0=t0, x0=x0, converged=bool(res.success))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass
class SupNorms:
    c0: float
    c1: float
    c2: float
    holder: float
    alpha: float


def sup_norms(base: BaseShrinker, u: np.ndarray, alpha: float = 0.5) -> SupNorms:
    """Discrete C0/C1/C2 sup norms and Hoelder-alpha seminorm of a grid field.

    Derivatives are arclength derivatives; the seminorm scans all sample
    pairs with the periodic arclength distance.
    """
    u = np.asarray(u, dtype=float)
    grid = base.grid
    us = grid.d1(u) / base.g
    uss = grid.d1(us) / base.g
    s = base.s
    length = s[-1] + base.g[-1] * grid.dtheta  # nearly; exact value unused
    ds = np.abs(s[:, None] - s[None, :])
    ds = np.minimum(ds, length - ds)
    np.fill_diagonal(ds, np.inf)
    ratios = np.abs(u[:, None] - u[None, :]) / ds ** alpha
    return SupNorms(
        c0=float(np.abs(u).max()),
        c1=float(np.abs(us).max()),
        c2=float(np.abs(uss).max()),
        holder=float(ratios.max()),
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def state_to_dict(state) -> dict:
    geom = _geom(state)
    t = state.t if isinstance(state, ImmersedState) else 0.0
    return {
        "kind": geom.kind,
        "n_samples": int(geom.n_samples),
        "points": geom.points.tolist(),
        "t": float(t),
    }


def state_from_dict(d: dict) -> ImmersedState:
    surface = from_points(d["kind"], np.asarray(d["points"], dtype=float))
    return ImmersedState(surface=surface, t=float(d.get("t", 0.0)))


def save_state(state, path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path) -> ImmersedState:
    with open(path) as fh:
        return state_from_dict(json.load(fh))


def geometry_csv(state) -> str:
    """Per-sample geometry table; columns match the on-disk interface."""
    geom = _geom(state)
    second = "y" if geom.kind == KIND_CURVE else "z"
    first = "x" if geom.kind == KIND_CURVE else "r"
    lines = [f"s,{first},{second},H,A2,xdotn,weight"]
    for j in range(geom.n_samples):
        vals = (geom.s[j], geom.points[j, 0], geom.points[j, 1],
                geom.H[j], geom.A2[j], geom.xdotn[j], geom.weight[j])
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"
