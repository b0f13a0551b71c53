"""Periodic spectral differentiation and quadrature weights.

All sampled states live on uniform periodic parameter grids, so tangential
derivatives are computed with Fourier differentiation applied in circulant
(gather) form: every output sample is produced by the identical ordered
arithmetic, which makes the stencil application exactly equivariant under
grid shifts.  Axisymmetric states that cross the axis are stored on a
doubled meridian grid; their surface quadrature uses Fejer-type weights in
the cosine of the grid parameter, which stay spectrally accurate even
though the physical integrand only vanishes linearly at the poles.
"""

from __future__ import annotations

import numpy as np

_GRID_CACHE: dict[int, "PeriodicGrid"] = {}


def _circulant_row(symbol: np.ndarray, n: int) -> np.ndarray:
    """First-row coefficients c with (Du)_j = sum_w c_w u_{(j+w) % n}."""
    e = np.zeros(n)
    e[0] = 1.0
    col = np.fft.ifft(symbol * np.fft.fft(e)).real  # col[j] = D_{j,0}
    # D_{j,k} = col[(j-k) % n], so the gather coefficient is c_w = col[(-w) % n].
    row = np.empty(n)
    row[0] = col[0]
    row[1:] = col[1:][::-1]
    return row


class PeriodicGrid:
    """Spectral first/second derivative operators on a uniform periodic grid."""

    def __init__(self, n: int):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"periodic grid size must be even and >= 8, got {n}")
        self.n = n
        self.dtheta = 2.0 * np.pi / n
        k = np.fft.fftfreq(n, d=1.0 / n)  # integer wavenumbers
        sym1 = 1j * k
        sym1[n // 2] = 0.0  # odd operator: drop the Nyquist mode
        sym2 = -(k ** 2)
        self.c1 = _circulant_row(sym1, n)
        self.c2 = _circulant_row(sym2, n)
        self.idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
        self._m1 = None
        self._m2 = None

    def d1(self, u: np.ndarray) -> np.ndarray:
        """d/dtheta along the last axis, in gather form.

        Every output sample is the identical ordered dot product, so the
        result commutes bitwise with grid shifts of the input.
        """
        return np.asarray(u)[..., self.idx] @ self.c1

    def d2(self, u: np.ndarray) -> np.ndarray:
        """d^2/dtheta^2 along the last axis, in gather form."""
        return np.asarray(u)[..., self.idx] @ self.c2

    def d1m(self, u: np.ndarray) -> np.ndarray:
        """d/dtheta via BLAS matmul: much faster, but only equivariant
        under grid shifts to rounding error."""
        return np.asarray(u) @ self.matrix_d1().T

    def d2m(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u) @ self.matrix_d2().T

    def matrix_d1(self) -> np.ndarray:
        if self._m1 is None:
            n = self.n
            self._m1 = self.c1[(np.arange(n)[None, :] - np.arange(n)[:, None]) % n]
        return self._m1

    def matrix_d2(self) -> np.ndarray:
        if self._m2 is None:
            n = self.n
            self._m2 = self.c2[(np.arange(n)[None, :] - np.arange(n)[:, None]) % n]
        return self._m2


def periodic_grid(n: int) -> PeriodicGrid:
    grid = _GRID_CACHE.get(n)
    if grid is None:
        grid = PeriodicGrid(n)
        _GRID_CACHE[n] = grid
    return grid


def fejer1_weights(n: int) -> np.ndarray:
    """Fejer's first quadrature rule on Chebyshev nodes cos((2j+1)pi/(2n)).

    Returns weights v with sum(v f(t_j)) ~ integral of f over [-1, 1];
    all weights are strictly positive.
    """
    j = np.arange(n)
    theta = (2 * j + 1) * np.pi / (2 * n)
    m = np.arange(1, n // 2 + 1)
    terms = np.cos(2.0 * np.outer(theta, m)) / (4.0 * m ** 2 - 1.0)
    return (2.0 / n) * (1.0 - 2.0 * terms.sum(axis=1))


def trapezoid_weights(n: int) -> np.ndarray:
    """Uniform periodic trapezoid weights for parameter length 2*pi."""
    return np.full(n, 2.0 * np.pi / n)
