"""Finding shrinkers and analyzing their second-variation spectrum.

The spectrum of the stability operator is computed as a dense symmetric
eigenproblem in the Gaussian-weighted inner product.  Newton iteration on
the gradient operator refines graphs over a base into nearby shrinkers.
The torus shrinker of revolution is constructed by shooting: profiles of
rotationally symmetric shrinkers are geodesics of the half-plane metric
with conformal potential log r - (r^2 + z^2)/4, so a closed profile is
found by launching vertically from the symmetry plane and tuning the
launch radius until the trajectory returns to the plane orthogonally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (BracketFailure, NoConvergence, SingularLinearization,
                     StiffODE)
from .geometry import KIND_CURVE, KIND_REVOLUTION, BaseShrinker, from_points
from .graphs import (gradient_operator, linearization, q_inner, q_norm,
                     weighted_forms)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray            # descending
    eigenfields: np.ndarray            # columns, q-orthonormal
    markers: list                      # "dilation" | "translation" | ""
    orthonormality_residual: float
    eigen_residual: float

    def field(self, i: int) -> np.ndarray:
        return self.eigenfields[:, i]


def group_fields(base: BaseShrinker) -> dict:
    """Normal components of the dilation and translation generators."""
    out = {"dilation": base.H.copy()}
    if base.kind == KIND_CURVE:
        out["translation_x"] = base.normal[:, 0].copy()
        out["translation_y"] = base.normal[:, 1].copy()
    else:
        out["translation_z"] = base.normal[:, 1].copy()
    return out


def _mark(base: BaseShrinker, vec: np.ndarray) -> str:
    nv = q_norm(base, vec)
    if nv == 0:
        return ""
    best, name = 0.0, ""
    for label, gen in group_fields(base).items():
        ng = q_norm(base, gen)
        if ng == 0:
            continue
        overlap = abs(q_inner(base, vec, gen)) / (nv * ng)
        if overlap > best:
            best, name = overlap, label
    if best < 0.9:
        return ""
    return "dilation" if name == "dilation" else "translation"


def spectrum(base: BaseShrinker, k_max: int = 12) -> SpectralDecomposition:
    """Top eigenpairs of the second variation operator, q-orthonormal."""
    wf = weighted_forms(base)
    wq = wf.q_weights
    if base.doubled:
        a_mat, b_mat, modes = wf.modal_problem()
        vals, vecs = sla.eigh(a_mat, b_mat)
        fields = modes @ vecs
    else:
        l0 = wf.operator_matrix()
        a_mat = wq[:, None] * l0
        a_mat = 0.5 * (a_mat + a_mat.T)
        vals, vecs = sla.eigh(a_mat, np.diag(wq))
        fields = vecs
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    fields = fields[:, order]
    k = min(k_max, vals.size)
    vals, fields = vals[:k], fields[:, :k]

    gram = fields.T @ (wq[:, None] * fields)
    ortho = float(np.abs(gram - np.eye(k)).max())
    l0 = wf.operator_matrix()
    resid = l0 @ fields - fields * vals[None, :]
    eig_res = 0.0
    for i in range(k):
        eig_res = max(eig_res, q_norm(base, resid[:, i]) /
                      max(abs(vals[i]), 1.0))
    markers = [_mark(base, fields[:, i]) for i in range(k)]
    return SpectralDecomposition(eigenvalues=vals, eigenfields=fields,
                                 markers=markers,
                                 orthonormality_residual=ortho,
                                 eigen_residual=float(eig_res))


def spectrum_csv(dec: SpectralDecomposition) -> str:
    lines = ["index,eigenvalue,marker"]
    for i, (lam, mark) in enumerate(zip(dec.eigenvalues, dec.markers)):
        lines.append(f"{i},{lam:.17g},{mark}")
    return "\n".join(lines) + "\n"


@dataclass
class StabilityReport:
    stable_modulo_group: bool
    ambiguous: bool
    morse_index: int                   # positive modes orthogonal to the group
    positive_eigenvalues: list
    group_overlaps: list
    notes: str = ""


def stability_report(base: BaseShrinker, dec: SpectralDecomposition = None,
                     zero_tol: float = 1e-6) -> StabilityReport:
    """Classify stability modulo translations and dilations.

    A state is declared unstable when a positive eigenvalue persists whose
    eigenfield is q-orthogonal to the span of the dilation and translation
    generators.  For revolution states only the axisymmetric sector is
    examined (off-axis translations are not representable), which is
    recorded in the notes.
    """
    if dec is None:
        dec = spectrum(base)
    gens = list(group_fields(base).values())
    # q-orthonormalize the group span
    basis = []
    for gen in gens:
        v = gen.astype(float)
        for b in basis:
            v = v - q_inner(base, v, b) * b
        nv = q_norm(base, v)
        if nv > 1e-12:
            basis.append(v / nv)

    positive, overlaps = [], []
    index = 0
    ambiguous = False
    for i, lam in enumerate(dec.eigenvalues):
        if abs(lam) < zero_tol:
            ambiguous = True
        if lam <= zero_tol:
            continue
        phi = dec.field(i)
        frac = np.sqrt(sum(q_inner(base, phi, b) ** 2 for b in basis))
        frac /= max(q_norm(base, phi), 1e-300)
        positive.append(float(lam))
        overlaps.append(float(frac))
        if frac < 0.5:
            index += 1
        elif 0.05 < frac < 0.95:
            # cannot cleanly attribute the mode to the group
            if abs(lam - 1.0) < zero_tol or abs(lam - 0.5) < zero_tol:
                ambiguous = True
    notes = ""
    if base.kind == KIND_REVOLUTION:
        notes = ("axisymmetric sector only; off-axis translation modes "
                 "are outside the discretization")
    return StabilityReport(stable_modulo_group=index == 0,
                           ambiguous=ambiguous,
                           morse_index=index,
                           positive_eigenvalues=positive,
                           group_overlaps=overlaps,
                           notes=notes)


# ---------------------------------------------------------------------------
# Newton refinement
# ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    residuals: list
    error_ratios: list                 # e_{k+1} / e_k^2 against the final iterate


def newton_find_shrinker(base: BaseShrinker, u0, tol: float = 1e-10,
                         max_iter: int = 30) -> NewtonResult:
    """Newton iteration u <- u - L_u^{-1} N(u) down to the q-norm tolerance."""
    u = np.asarray(u0, dtype=float).copy()
    iterates = [u.copy()]
    residuals = [q_norm(base, gradient_operator(base, u))]
    its = 0
    while residuals[-1] >= tol:
        if its >= max_iter:
            raise NoConvergence(
                f"newton stalled at residual {residuals[-1]:.3e}")
        lu = linearization(base, u)
        wq = weighted_forms(base).q_weights
        sym = wq[:, None] * lu
        sym = 0.5 * (sym + sym.T)
        eigs = sla.eigh(sym, np.diag(wq), eigvals_only=True)
        if np.abs(eigs).min() < 1e-8:
            raise SingularLinearization(
                f"|eigenvalue| = {np.abs(eigs).min():.3e} below 1e-8")
        u = u - np.linalg.solve(lu, gradient_operator(base, u))
        iterates.append(u.copy())
        residuals.append(q_norm(base, gradient_operator(base, u)))
        its += 1
    errors = [q_norm(base, v - u) for v in iterates[:-1]]
    ratios = []
    for e0, e1 in zip(errors[:-1], errors[1:]):
        if e0 > 0:
            ratios.append(float(e1 / e0 ** 2))
    return NewtonResult(u=u, iterations=its, residuals=residuals,
                        error_ratios=ratios)


# ---------------------------------------------------------------------------
# torus shooting
# ---------------------------------------------------------------------------

@dataclass
class ShootingResult:
    r0: float
    profile: np.ndarray
    state: BaseShrinker
    residual_sup: float
    closure_defect: float
    half_length: float
    defect_table: list = field(default_factory=list)


def _profile_ode(s, y):
    r, z, phi = y
    sin_p, cos_p = np.sin(phi), np.cos(phi)
    kappa = 0.5 * (r * sin_p - z * cos_p) - sin_p / r
    return [cos_p, sin_p, kappa]


def _shoot_half(r0: float, ode_tol: float, s_max: float = 30.0):
    """Integrate the profile geodesic from a vertical launch at (r0, 0)
    until it returns to the symmetry plane.  Returns (defect, sol, s_end)
    where defect is the radial tangent component at the return crossing."""

    def crossing(s, y):
        return y[1]
    crossing.terminal = True
    crossing.direction = -1.0

    def axis(s, y):
        return y[0] - 1e-8
    axis.terminal = True
    axis.direction = -1.0

    sol = solve_ivp(_profile_ode, (0.0, s_max), [r0, 0.0, 0.5 * np.pi],
                    method="RK45", rtol=ode_tol, atol=1e-13,
                    events=(crossing, axis), dense_output=True,
                    max_step=0.1)
    if sol.status == -1:
        raise StiffODE(sol.message)
    if sol.t_events[1].size > 0:
        # crashed into the axis: treat as maximal negative defect
        return -1.0, sol, float(sol.t_events[1][0])
    if sol.t_events[0].size == 0:
        raise StiffODE(f"no return to the symmetry plane from r0 = {r0}")
    s_end = float(sol.t_events[0][0])
    phi_end = sol.sol(s_end)[2]
    return float(np.cos(phi_end)), sol, s_end


def shoot_angenent_torus(r0_bracket=(0.3, 1.2), ode_tol: float = 1e-12,
                         n_samples: int = 512, scan_points: int = 25,
                         polish: bool = True) -> ShootingResult:
    """Closed torus-like shrinker of revolution by shooting.

    Scans the bracket for a sign change of the closure defect, refines the
    launch radius with a root solve, and assembles the mirror-closed
    profile on an equal-arclength grid.  The ODE solver's dense output
    carries per-step interpolation noise that spectral differentiation
    would amplify, so by default the profile is polished by one Newton
    solve of the gradient operator over itself, which lands on the smooth
    discrete shrinker.
    """
    lo, hi = r0_bracket
    if not (0.0 < lo < hi < 2.0 * np.sqrt(2.0)):
        raise BracketFailure("bracket must lie inside (0, 2*sqrt(2))")

    table = []
    rs = np.linspace(lo, hi, scan_points)
    defects = []
    for r0 in rs:
        d, _, _ = _shoot_half(float(r0), min(1e-8, ode_tol * 1e2))
        defects.append(d)
        table.append((float(r0), float(d)))
    defects = np.asarray(defects)
    sign_change = np.nonzero(np.diff(np.sign(defects)) != 0)[0]
    if sign_change.size == 0:
        raise BracketFailure(
            f"closure defect has no sign change on [{lo}, {hi}]")
    i = int(sign_change[0])

    def defect_of(r0):
        return _shoot_half(float(r0), ode_tol)[0]

    r_star = brentq(defect_of, rs[i], rs[i + 1], xtol=1e-13, rtol=1e-15)
    defect, sol, s_end = _shoot_half(float(r_star), ode_tol)

    half = n_samples // 2
    sigma = np.arange(n_samples) * (2.0 * s_end) / n_samples
    pts = np.empty((n_samples, 2))
    up = sigma <= s_end
    vals_up = sol.sol(sigma[up])
    pts[up, 0] = vals_up[0]
    pts[up, 1] = vals_up[1]
    vals_dn = sol.sol(2.0 * s_end - sigma[~up])
    pts[~up, 0] = vals_dn[0]
    pts[~up, 1] = -vals_dn[1]

    state = from_points(KIND_REVOLUTION, pts)
    if polish:
        from .flow import resample_equal_arclength
        from .graphs import graph_points
        for final in (False, True):
            result = newton_find_shrinker(state, np.zeros(n_samples),
                                          tol=1e-13, max_iter=8)
            pts = graph_points(state, result.u)
            if not final:
                pts = resample_equal_arclength(pts)
            state = from_points(KIND_REVOLUTION, pts)
    residual = float(np.abs(state.shrinker_residual()).max())
    return ShootingResult(r0=float(r_star), profile=pts, state=state,
                          residual_sup=residual,
                          closure_defect=float(defect),
                          half_length=float(s_end),
                          defect_table=table)
