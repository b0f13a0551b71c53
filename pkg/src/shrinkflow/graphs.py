"""Normal-graph calculus over a sampled base hypersurface.

A height field u over a base state describes the hypersurface
{p + u(p) n(p)}.  Everything here is computed from closed-form expressions
in the per-sample slots (u, u_theta, u_thetatheta): for plane curves and
axisymmetric meridians the graph's tangent, normal, curvature, relative
area element, tilt factor and support function all reduce to pointwise
formulas in those three slots and the cached base geometry.  The discrete
flow and gradient operators are exactly the chain rule through these
formulas, so the assembled Jacobian is the exact derivative of the
discrete operator (up to the slot finite differences used for the two
nonlinear coefficient partials).

The same quantities can be obtained by embedding the graph samples and
re-running the geometry pipeline; tests cross-check the two routes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GraphOverflow, GridMismatch
from .geometry import (KIND_REVOLUTION, BaseShrinker, ImmersedState,
                       from_points)


@dataclass
class GraphFunction:
    """Periodic grid of normal-graph heights over a base state."""

    base: BaseShrinker
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.base.n_samples,):
            raise GridMismatch("graph heights must match the base grid")


def _values(base: BaseShrinker, u) -> np.ndarray:
    if isinstance(u, GraphFunction):
        if u.base is not base and u.base.n_samples != base.n_samples:
            raise GridMismatch("graph function lives on a different grid")
        return u.values
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != base.n_samples:
        raise GridMismatch("field length does not match the base grid")
    return u


def _check_reach(base: BaseShrinker, u: np.ndarray) -> None:
    if np.abs(u).max() >= base.reach_estimate:
        raise GraphOverflow(
            f"sup|u| = {np.abs(u).max():.6g} exceeds reach "
            f"{base.reach_estimate:.6g}")
    if base.kind == KIND_REVOLUTION:
        xu = base.points[:, 0] + u * base.normal[:, 0]
        if base.doubled:
            # offsets may not move samples across the axis
            if np.any(xu * base.points[:, 0] <= 0.0):
                raise GraphOverflow("graph crosses the axis of revolution")
        elif xu.min() <= 0.0:
            raise GraphOverflow("graph crosses the axis of revolution")


# ---------------------------------------------------------------------------
# pointwise slot evaluator
# ---------------------------------------------------------------------------

class _SlotEval:
    """Pointwise graph quantities as functions of (s, u_theta, u_thetatheta).

    Broadcasts over leading axes, so slot derivatives and batched flows
    reuse the same code path.
    """

    def __init__(self, base: BaseShrinker):
        self.base = base
        grid = base.grid
        self.g = base.g
        self.gtheta = base.gtheta
        self.kappa = base.kappa
        self.gk_theta = grid.d1(base.g * base.kappa)
        self.xdotn = base.xdotn
        self.xdott = base.xdott
        self.nx = base.normal[:, 0]
        self.tx = base.tangent[:, 0]
        self.x = base.points[:, 0]
        self.revolution = base.kind == KIND_REVOLUTION

    def all(self, s, ut, utt):
        """Return (nu, w, eta, H, zeta, M, N) for the given slot arrays."""
        g, kappa = self.g, self.kappa
        one_sk = 1.0 + s * kappa
        y = ut / g
        jfac = np.sqrt(one_sk ** 2 + y ** 2)

        w = jfac / one_sk
        a = one_sk / jfac
        b = y / jfac
        eta = a * (self.xdotn + s) - b * self.xdott

        gp1 = g * one_sk                       # tangential Gamma'
        gpp1 = self.gtheta + 2.0 * ut * g * kappa + s * self.gk_theta
        gpp2 = utt - g ** 2 * kappa * one_sk
        kappa_u = -(gp1 * gpp2 - ut * gpp1) / (g * jfac) ** 3

        if self.revolution:
            xu = self.x + s * self.nx
            nu = jfac * xu / self.x
            hu = kappa_u + (a * self.nx - b * self.tx) / xu
        else:
            nu = jfac
            hu = kappa_u

        zeta = (nu / w ** 2) * np.exp(-0.25 * (2.0 * s * self.xdotn + s ** 2))
        m_op = w * (0.5 * eta - hu)
        n_op = zeta * m_op
        return nu, w, eta, hu, zeta, m_op, n_op

    def n_of(self, s, ut, utt):
        return self.all(s, ut, utt)[6]

    def m_of(self, s, ut, utt):
        return self.all(s, ut, utt)[5]


_SLOT_CACHE: dict[int, _SlotEval] = {}


def _slots(base: BaseShrinker) -> _SlotEval:
    ev = _SLOT_CACHE.get(id(base))
    if ev is None or ev.base is not base:
        ev = _SlotEval(base)
        _SLOT_CACHE[id(base)] = ev
    return ev


def _slot_arrays(base: BaseShrinker, u: np.ndarray):
    grid = base.grid
    return u, grid.d1(u), grid.d2(u)


# ---------------------------------------------------------------------------
# public graph quantities and operators
# ---------------------------------------------------------------------------

@dataclass
class GraphQuantities:
    nu: np.ndarray
    w: np.ndarray
    eta: np.ndarray
    H: np.ndarray
    zeta: np.ndarray


def graph_quantities(base: BaseShrinker, u) -> GraphQuantities:
    """Relative area element, speed, support function, mean curvature and
    gradient-factor of the normal graph of u."""
    u = _values(base, u)
    _check_reach(base, u)
    nu, w, eta, hu, zeta, _, _ = _slots(base).all(*_slot_arrays(base, u))
    return GraphQuantities(nu=nu, w=w, eta=eta, H=hu, zeta=zeta)


def flow_operator(base: BaseShrinker, u) -> np.ndarray:
    """Normal velocity of the rescaled flow in graph coordinates,
    w * (eta/2 - H_u)."""
    u = _values(base, u)
    _check_reach(base, u)
    return _slots(base).m_of(*_slot_arrays(base, u))


def gradient_operator(base: BaseShrinker, u) -> np.ndarray:
    """Negative Gaussian-area gradient of the graph, zeta * (flow operator)."""
    u = _values(base, u)
    _check_reach(base, u)
    return _slots(base).n_of(*_slot_arrays(base, u))


def graph_points(base: BaseShrinker, u) -> np.ndarray:
    u = _values(base, u)
    return base.points + u[:, None] * base.normal


def graph_state(base: BaseShrinker, u, t: float = 0.0) -> ImmersedState:
    """Embed the graph samples and rebuild geometry from scratch."""
    return ImmersedState(surface=from_points(base.kind, graph_points(base, u)), t=t)


def graph_area(base: BaseShrinker, u) -> float:
    """Gaussian area of the graph, integrated over the base grid."""
    u = _values(base, u)
    _check_reach(base, u)
    nu, _, _, _, _, _, _ = _slots(base).all(*_slot_arrays(base, u))
    y = graph_points(base, u)
    wgt = np.exp(-0.25 * np.sum(y ** 2, axis=1))
    return float(base.area_w @ (nu * wgt))


def graph_gradient_norm2(base: BaseShrinker, u) -> float:
    """Integral of |<x,n>/2 - H|^2 exp(-|x|^2/4) over the graph."""
    u = _values(base, u)
    _check_reach(base, u)
    nu, w, _, _, _, m_op, _ = _slots(base).all(*_slot_arrays(base, u))
    y = graph_points(base, u)
    wgt = np.exp(-0.25 * np.sum(y ** 2, axis=1))
    return float(base.area_w @ (nu * wgt * (m_op / w) ** 2))


def graph_velocity_l1(base: BaseShrinker, u) -> float:
    """Integral of |<x,n>/2 - H| exp(-|x|^2/4) over the graph."""
    u = _values(base, u)
    nu, w, _, _, _, m_op, _ = _slots(base).all(*_slot_arrays(base, u))
    y = graph_points(base, u)
    wgt = np.exp(-0.25 * np.sum(y ** 2, axis=1))
    return float(base.area_w @ (nu * wgt * np.abs(m_op / w)))


# ---------------------------------------------------------------------------
# weighted forms
# ---------------------------------------------------------------------------

class WeightedForms:
    """Gaussian-weighted bilinear forms and the divergence-form operator.

    q_weights are strictly positive and the second-variation matrix is
    self-adjoint with respect to them to machine precision.  On plain
    periodic grids (curves, torus-like profiles) the operator is the
    collocation divergence form -Wq^{-1} S + (|A|^2 + 1/2) with symmetric
    stiffness S.  On doubled meridian grids the quadrature weights are not
    a smooth density, so the weak form is assembled instead in the even
    cosine basis (where the quadrature is only ever used for integrals,
    for which it is spectrally exact) and lifted back to the nodal grid;
    with B = Phi^T Wq Phi this gives Wq L = Phi^{-T} A Phi^{-1}, again
    exactly symmetric.  The lifted operator annihilates the unphysical
    odd part of doubled fields.
    """

    def __init__(self, base: BaseShrinker):
        self.base = base
        self.q_weights = base.area_w * base.weight
        grid = base.grid
        inv_g = 1.0 / base.g
        self._ds = grid.matrix_d1() * inv_g[:, None]
        self._operator = None
        self._modal = None

    # The exact-Nyquist checkerboard is invisible to the odd spectral
    # derivative, so the divergence-form stiffness would leave it feeling
    # only the potential and fake an eigenvalue at |A|^2 + 1/2.  A
    # q-symmetric rank-one penalty parks that mode far down the spectrum.
    SPURIOUS_SHIFT = 1e3

    def _assemble_loop(self) -> np.ndarray:
        stiff = self._ds.T @ (self.q_weights[:, None] * self._ds)
        lap = -(stiff / self.q_weights[:, None])
        op = lap + np.diag(self.base.A2 + 0.5)
        nyq = np.where(np.arange(self.base.n_samples) % 2 == 0, 1.0, -1.0)
        denom = float((nyq * self.q_weights) @ nyq)
        op -= self.SPURIOUS_SHIFT * np.outer(nyq, nyq * self.q_weights) / denom
        return op

    def modal_problem(self):
        """Galerkin matrices (A, B, M) of the second variation in the even
        cosine basis on a doubled grid.

        The basis is truncated at K = (n/4 - 1)-ish so every Gram entry is a
        quadrature of polynomial degree within the exactness range of the
        Fejer rule; higher bands would alias.  Returns (a_mat, b_mat, modes)
        with modes of shape (n, K+1).
        """
        base = self.base
        n = base.n_samples
        half = n // 2
        kmax = (half - 1) // 2
        phi = (np.arange(n) + 0.5) * base.grid.dtheta
        k = np.arange(kmax + 1)
        modes = np.cos(np.outer(phi, k))
        dmodes = -np.sin(np.outer(phi, k)) * k / base.g[:, None]
        wq = self.q_weights
        pot = wq * (base.A2 + 0.5)
        a_mat = -(dmodes.T @ (wq[:, None] * dmodes)) + modes.T @ (pot[:, None] * modes)
        a_mat = 0.5 * (a_mat + a_mat.T)
        b_mat = modes.T @ (wq[:, None] * modes)
        b_mat = 0.5 * (b_mat + b_mat.T)
        return a_mat, b_mat, modes

    def _assemble_doubled(self) -> np.ndarray:
        a_mat, b_mat, modes = self.modal_problem()
        binv_a_binv = np.linalg.solve(b_mat, np.linalg.solve(b_mat, a_mat).T)
        # L = M B^{-1} A B^{-1} M^T Wq: q-self-adjoint, band-limited
        op = modes @ binv_a_binv @ (modes.T * self.q_weights[None, :])
        # park everything outside the resolved even band far down the
        # spectrum so the matrix stays invertible in solves
        proj = modes @ np.linalg.solve(b_mat, modes.T * self.q_weights[None, :])
        op -= self.SPURIOUS_SHIFT * (np.eye(self.base.n_samples) - proj)
        return op

    def operator_matrix(self) -> np.ndarray:
        """Second variation Delta + |A|^2 - <p, grad>/2 + 1/2 at u = 0."""
        if self._operator is None:
            if self.base.doubled:
                self._operator = self._assemble_doubled()
            else:
                self._operator = self._assemble_loop()
        return self._operator

    def derivative_matrix(self) -> np.ndarray:
        return self._ds


_FORMS_CACHE: dict[int, WeightedForms] = {}


def weighted_forms(base: BaseShrinker) -> WeightedForms:
    wf = _FORMS_CACHE.get(id(base))
    if wf is None or wf.base is not base:
        wf = WeightedForms(base)
        _FORMS_CACHE[id(base)] = wf
    return wf


def q_inner(base: BaseShrinker, u, v) -> float:
    u = _values(base, u)
    v = _values(base, v)
    return float((base.area_w * base.weight) @ (u * v))


def q_norm(base: BaseShrinker, u) -> float:
    return float(np.sqrt(max(q_inner(base, u, u), 0.0)))


def q2_norm(base: BaseShrinker, u) -> float:
    """Weighted W^{2,2} norm: q-weighted u^2 + |grad u|^2 + |Hess u|^2."""
    u = _values(base, u)
    grid = base.grid
    us = grid.d1(u) / base.g
    uss = grid.d1(us) / base.g
    hess2 = uss ** 2
    if base.kind == KIND_REVOLUTION:
        hess2 = hess2 + (base.tangent[:, 0] / base.points[:, 0] * us) ** 2
    qw = base.area_w * base.weight
    return float(np.sqrt(qw @ (u ** 2 + us ** 2 + hess2)))


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

def second_variation_matrix(base: BaseShrinker) -> np.ndarray:
    return weighted_forms(base).operator_matrix()


def matrix_csv(matrix: np.ndarray) -> str:
    """Dense operator matrix as CSV for offline inspection."""
    matrix = np.asarray(matrix)
    rows = (",".join(f"{v:.17g}" for v in row) for row in matrix)
    return "\n".join(rows) + "\n"


def _slot_partials(base: BaseShrinker, u: np.ndarray):
    """Partials of the pointwise gradient operator wrt its three slots.

    The second-derivative slot enters linearly, so its coefficient is
    computed from two evaluations; the other two use fourth-order
    Richardson differences in the slot value.
    """
    ev = _slots(base)
    s, ut, utt = _slot_arrays(base, u)

    n0 = ev.n_of(s, ut, utt)
    a_coef = ev.n_of(s, ut, utt + 1.0) - n0

    def richardson(which: str):
        # (8 (f(+h) - f(-h)) - (f(+2h) - f(-2h))) / (12 h), h per sample
        scale = 1e-3 * (1.0 + np.abs(s if which == "s" else ut))
        out = None
        for mult, wcoef in ((1.0, 8.0), (2.0, -1.0)):
            h = mult * scale
            if which == "s":
                fp = ev.n_of(s + h, ut, utt)
                fm = ev.n_of(s - h, ut, utt)
            else:
                fp = ev.n_of(s, ut + h, utt)
                fm = ev.n_of(s, ut - h, utt)
            term = wcoef * (fp - fm)
            out = term if out is None else out + term
        return out / (12.0 * scale)

    b_coef = richardson("ut")
    c_coef = richardson("s")
    return a_coef, b_coef, c_coef


def linearization(base: BaseShrinker, u=None) -> np.ndarray:
    """Frechet derivative of the gradient operator at u, as a dense matrix.

    At u = 0 the exactly q-self-adjoint divergence-form assembly is
    returned; elsewhere the quasilinear coefficient form
    a * v'' + b * v' + c * v is assembled from the slot partials.
    """
    if u is None:
        return second_variation_matrix(base)
    u = _values(base, u)
    if not np.any(u):
        return second_variation_matrix(base)
    _check_reach(base, u)
    a_coef, b_coef, c_coef = _slot_partials(base, u)
    grid = base.grid
    mat = a_coef[:, None] * grid.matrix_d2() + b_coef[:, None] * grid.matrix_d1()
    mat[np.arange(base.n_samples), np.arange(base.n_samples)] += c_coef
    return mat


def frechet_remainder(base: BaseShrinker, u, v, eps_list) -> dict:
    """Size of N(u + eps v) - N(u) - eps L_u v, scaled by eps^2.

    Returns the per-eps ratios in the q-norm and a flag that trips when a
    ratio grows by more than 2x across consecutive halvings of eps.
    """
    u = _values(base, u)
    v = _values(base, v)
    lu = linearization(base, u)
    n_u = gradient_operator(base, u)
    ratios = []
    for eps in eps_list:
        n_pert = gradient_operator(base, u + eps * v)
        rem = n_pert - n_u - eps * (lu @ v)
        ratios.append(q_norm(base, rem) / eps ** 2)
    ratios = np.asarray(ratios)
    grew = False
    for r0, r1 in zip(ratios[:-1], ratios[1:]):
        if r1 > 2.0 * max(r0, 1e-300):
            grew = True
    return {"eps": list(map(float, eps_list)),
            "ratios": ratios.tolist(),
            "bounded": not grew}


# ---------------------------------------------------------------------------
# Taylor table of the graph quantity functions
# ---------------------------------------------------------------------------

def _arclength_slot_eval(base: BaseShrinker, s, y):
    """(w, nu, eta) as functions of the value and arclength-gradient slots."""
    ev = _slots(base)
    ut = base.g * y
    zero = np.zeros_like(base.g)
    nu, w, eta, _, _, _, _ = ev.all(s, ut, zero)
    return w, nu, eta


def taylor_check(base: BaseShrinker, step: float = 1e-2) -> dict:
    """Verify the first and second order slot derivatives of the graph
    quantity functions against their known values.

    Uses Richardson-extrapolated central differences in the (value,
    gradient) slots at (0, 0).  Returns max relative errors, with
    denominators floored at 1 for entries whose exact value vanishes.
    """
    n = base.n_samples
    zero = np.zeros(n)
    h = step

    def d_ds(func_idx):
        vals = {}
        for mult in (1.0, 2.0):
            fp = _arclength_slot_eval(base, zero + mult * h, zero)[func_idx]
            fm = _arclength_slot_eval(base, zero - mult * h, zero)[func_idx]
            vals[mult] = (fp - fm) / (2.0 * mult * h)
        return (4.0 * vals[1.0] - vals[2.0]) / 3.0

    def d_dy(func_idx):
        vals = {}
        for mult in (1.0, 2.0):
            fp = _arclength_slot_eval(base, zero, zero + mult * h)[func_idx]
            fm = _arclength_slot_eval(base, zero, zero - mult * h)[func_idx]
            vals[mult] = (fp - fm) / (2.0 * mult * h)
        return (4.0 * vals[1.0] - vals[2.0]) / 3.0

    def d2_ds(func_idx):
        vals = {}
        f0 = _arclength_slot_eval(base, zero, zero)[func_idx]
        for mult in (1.0, 2.0):
            fp = _arclength_slot_eval(base, zero + mult * h, zero)[func_idx]
            fm = _arclength_slot_eval(base, zero - mult * h, zero)[func_idx]
            vals[mult] = (fp - 2.0 * f0 + fm) / (mult * h) ** 2
        return (4.0 * vals[1.0] - vals[2.0]) / 3.0

    def d2_dy(func_idx):
        vals = {}
        f0 = _arclength_slot_eval(base, zero, zero)[func_idx]
        for mult in (1.0, 2.0):
            fp = _arclength_slot_eval(base, zero, zero + mult * h)[func_idx]
            fm = _arclength_slot_eval(base, zero, zero - mult * h)[func_idx]
            vals[mult] = (fp - 2.0 * f0 + fm) / (mult * h) ** 2
        return (4.0 * vals[1.0] - vals[2.0]) / 3.0

    W, NU, ETA = 0, 1, 2

    def rel(computed, expected):
        denom = np.maximum(np.abs(expected), 1.0)
        return float(np.max(np.abs(computed - expected) / denom))

    entries = {
        "ds_w": rel(d_ds(W), np.zeros(n)),
        "dy_w": rel(d_dy(W), np.zeros(n)),
        "dydy_w": rel(d2_dy(W), np.ones(n)),
        "ds_nu": rel(d_ds(NU), base.H),
        "dsds_nu": rel(d2_ds(NU), base.H ** 2 - base.A2),
        "dydy_nu": rel(d2_dy(NU), np.ones(n)),
        "ds_eta": rel(d_ds(ETA), np.ones(n)),
        "dy_eta": rel(d_dy(ETA), -base.xdott),
    }
    entries["max"] = max(entries.values())
    return entries
