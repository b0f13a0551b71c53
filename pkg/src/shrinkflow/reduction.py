"""Discretized Lyapunov-Schmidt machinery around a base shrinker.

The kernel projection is built from the computed spectrum; since every
shrinker in this laboratory has trivial kernel, a synthetic kernel (the
lowest-|eigenvalue| eigenfields) can be designated to exercise the
reduction nontrivially, and is labeled as such.  The inverse of
(projection + gradient operator) is a full Newton iteration, and the
reduced function is the Gaussian area composed with that inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoConvergence, SingularLinearization
from .geometry import BaseShrinker
from .graphs import (gradient_operator, graph_area, linearization,
                     q_norm, weighted_forms)
from .shrinkers import SpectralDecomposition, spectrum


@dataclass
class Reduction:
    base: BaseShrinker
    kernel_basis: np.ndarray            # (n, m), q-orthonormal columns
    projection: np.ndarray              # (n, n)
    synthetic: bool
    newton_tol: float = 1e-10
    basin: float = 0.1
    max_iter: int = 40
    cache: dict = field(default_factory=dict)

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]


def build_reduction(base: BaseShrinker, kernel_tol: float = 1e-8,
                    synthetic_m: int = 0,
                    dec: Optional[SpectralDecomposition] = None,
                    newton_tol: float = 1e-10) -> Reduction:
    """Assemble the kernel basis and its q-orthogonal projection.

    With ``synthetic_m`` > 0 the m lowest-|eigenvalue| eigenfields are
    designated as a synthetic kernel even though their eigenvalues are
    away from zero; the reduction is then exercising the machinery, not
    describing a degenerate shrinker.
    """
    if dec is None:
        dec = spectrum(base, k_max=max(16, synthetic_m + 6))
    lam = dec.eigenvalues
    if synthetic_m > 0:
        order = np.argsort(np.abs(lam))
        take = order[:synthetic_m]
        synthetic = True
    else:
        take = np.nonzero(np.abs(lam) < kernel_tol)[0]
        synthetic = False
    basis = dec.eigenfields[:, take] if take.size else np.zeros((base.n_samples, 0))
    wq = weighted_forms(base).q_weights
    # re-orthonormalize in q to machine precision
    cols = []
    for i in range(basis.shape[1]):
        v = basis[:, i].copy()
        for c in cols:
            v -= float((wq * c) @ v) * c
        nv = float(np.sqrt((wq * v) @ v))
        if nv > 1e-12:
            cols.append(v / nv)
    basis = np.stack(cols, axis=1) if cols else np.zeros((base.n_samples, 0))
    proj = basis @ (basis.T * wq[None, :]) if basis.size else np.zeros(
        (base.n_samples, base.n_samples))
    return Reduction(base=base, kernel_basis=basis, projection=proj,
                     synthetic=synthetic, newton_tol=newton_tol)


def nbar(red: Reduction, u) -> np.ndarray:
    """Projection plus gradient operator (the invertible augmented map)."""
    u = np.asarray(u, dtype=float)
    return red.projection @ u + gradient_operator(red.base, u)


def psi(red: Reduction, v) -> np.ndarray:
    """Newton inverse of the augmented map: returns u with nbar(u) = v."""
    v = np.asarray(v, dtype=float)
    if q_norm(red.base, v) >= red.basin:
        raise NoConvergence("target outside the configured Newton basin")
    key = v.tobytes()
    hit = red.cache.get(key)
    if hit is not None:
        return hit.copy()
    u = np.zeros_like(v)
    for _ in range(red.max_iter):
        res = nbar(red, u) - v
        if q_norm(red.base, res) < red.newton_tol:
            red.cache[key] = u.copy()
            return u
        mat = red.projection + linearization(red.base, u)
        try:
            step = np.linalg.solve(mat, res)
        except np.linalg.LinAlgError as exc:
            raise SingularLinearization(str(exc)) from exc
        u = u - step
    raise NoConvergence(
        f"psi stalled at residual {q_norm(red.base, nbar(red, u) - v):.3e}")


def kernel_coordinates(red: Reduction, u) -> np.ndarray:
    wq = weighted_forms(red.base).q_weights
    return red.kernel_basis.T @ (wq * np.asarray(u, dtype=float))


def kernel_field(red: Reduction, coords) -> np.ndarray:
    return red.kernel_basis @ np.asarray(coords, dtype=float)


def reduced_function(red: Reduction, coords, grad_step: float = 1e-6):
    """The Gaussian area through the inverse map, f = F(psi(.)), together
    with its kernel-space gradient by centered differences."""
    coords = np.atleast_1d(np.asarray(coords, dtype=float))
    value = graph_area(red.base, psi(red, kernel_field(red, coords)))
    grad = np.zeros_like(coords)
    for i in range(coords.size):
        step = np.zeros_like(coords)
        step[i] = grad_step
        fp = graph_area(red.base, psi(red, kernel_field(red, coords + step)))
        fm = graph_area(red.base, psi(red, kernel_field(red, coords - step)))
        grad[i] = (fp - fm) / (2.0 * grad_step)
    return float(value), grad


def lemma_f_check(red: Reduction, u) -> dict:
    """Ratio |F(u) - f(proj u)| / ||N(u)||_Q^2."""
    u = np.asarray(u, dtype=float)
    n_u = gradient_operator(red.base, u)
    rhs = q_norm(red.base, n_u) ** 2
    coords = kernel_coordinates(red, u)
    f_proj, _ = reduced_function(red, coords) if red.kernel_dim else (
        graph_area(red.base, psi(red, np.zeros_like(u))), None)
    lhs = abs(graph_area(red.base, u) - f_proj)
    ratio = 0.0 if rhs == 0 and lhs == 0 else lhs / max(rhs, 1e-300)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio}


def lemma_grad_check(red: Reduction, u) -> dict:
    """Ratio |grad_K f|(proj u) / ||N(u)||_Q."""
    u = np.asarray(u, dtype=float)
    n_u = gradient_operator(red.base, u)
    rhs = q_norm(red.base, n_u)
    if red.kernel_dim == 0:
        return {"lhs": 0.0, "rhs": rhs, "ratio": 0.0}
    coords = kernel_coordinates(red, u)
    _, grad = reduced_function(red, coords)
    lhs = float(np.linalg.norm(grad))
    ratio = 0.0 if rhs == 0 and lhs == 0 else lhs / max(rhs, 1e-300)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio}


def ratio_ladder(red: Reduction, u, eps_list, which: str = "F") -> dict:
    """Lemma ratios along u_eps = eps * u; the assertion is boundedness of
    the fitted constant, never a specific magnitude."""
    check = lemma_f_check if which == "F" else lemma_grad_check
    ratios = [check(red, eps * np.asarray(u, dtype=float))["ratio"]
              for eps in eps_list]
    ratios = np.asarray(ratios)
    positive = ratios[ratios > 0]
    spread = float(positive.max() / positive.min()) if positive.size >= 2 else 1.0
    return {"eps": list(map(float, eps_list)), "ratios": ratios.tolist(),
            "spread": spread, "bounded": spread <= 10.0}
