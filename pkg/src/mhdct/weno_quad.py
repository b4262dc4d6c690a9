"""WENO-Z quadrature of the exponential kernel on a uniform line.

The left-sided cell integral for the cell ``[x_{i-1}, x_i]`` is

.. math::

    J^L_i = \\alpha \\int_{x_{i-1}}^{x_i} e^{-\\alpha (x_i - y)} v(y)\\, dy
          = \\nu \\int_{-1}^{0} e^{\\nu s} v(x_i + s \\Delta x)\\, ds,

with :math:`\\nu = \\alpha \\Delta x`. It is approximated by integrating
interpolating polynomials exactly against the kernel: three cubic
interpolants on the small stencils ``{i-3+r, ..., i+r}`` and one quintic on
the big stencil ``{i-3, ..., i+2}``. The right-sided integral ``J^R`` is the
mirror image and is obtained by reversing the line.

Node offsets below are always measured in units of ``dx`` relative to
``x_i``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

#: regularization in the smoothness-based weights
WENO_EPS = 1.0e-6

SMALL_OFFSETS = (
    (-3, -2, -1, 0),
    (-2, -1, 0, 1),
    (-1, 0, 1, 2),
)
BIG_OFFSETS = (-3, -2, -1, 0, 1, 2)

# big stencils shifted inward for the two cells next to each outflow end;
# keys are the cell index i for the left end and i - N for the right end
SHIFTED_OFFSETS = {
    1: (-1, 0, 1, 2, 3, 4),
    2: (-2, -1, 0, 1, 2, 3),
    -1: (-4, -3, -2, -1, 0, 1),
    0: (-5, -4, -3, -2, -1, 0),
}

_SERIES_CUTOFF = 2.0
_SERIES_TERMS = 45


def kernel_moments(nu: float, qmax: int = 5) -> np.ndarray:
    """Moments ``m_q = nu * int_{-1}^{0} exp(nu s) s^q ds`` for ``q <= qmax``.

    An upward recurrence from integration by parts is used for ``nu >= 2``;
    below that a Taylor series in ``nu`` avoids the cancellation in
    ``1 - exp(-nu)``.
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")

    m = np.empty(qmax + 1)
    if nu < _SERIES_CUTOFF:
        n = np.arange(_SERIES_TERMS)
        # nu^n / n! built incrementally to stay in range
        coef = np.cumprod(np.concatenate([[1.0], np.full(_SERIES_TERMS - 1, nu)])
                          / np.concatenate([[1.0], n[1:]]))
        sign = np.where(n % 2 == 0, 1.0, -1.0)
        for q in range(qmax + 1):
            terms = coef * sign * (-1.0) ** q / (n + q + 1)
            m[q] = nu * math.fsum(terms)
    else:
        emnu = math.exp(-nu)
        m[0] = -math.expm1(-nu)
        for q in range(1, qmax + 1):
            m[q] = -((-1.0) ** q) * emnu - (q / nu) * m[q - 1]
    return m


def stencil_weights(offsets, moments: np.ndarray) -> np.ndarray:
    """Node weights reproducing ``moments`` for polynomials up to degree
    ``len(offsets) - 1``."""
    s = np.asarray(offsets, dtype=np.float64)
    degree = len(s)
    vander = s[None, :] ** np.arange(degree)[:, None]
    return np.linalg.solve(vander, moments[:degree])


def _kernel_mean(poly_ascending: np.ndarray, moments: np.ndarray) -> float:
    return float(np.dot(poly_ascending, moments[: len(poly_ascending)]))


def _linear_weights(moments: np.ndarray) -> np.ndarray:
    # Each small quadrature is exact on cubics, so the big/small consistency
    # only has to hold for s^4 and s^5. Their interpolation errors are the
    # nodal polynomial w_r(s) and w_r(s) (s + sum of nodes).
    rows = [np.ones(3), np.empty(3), np.empty(3)]
    for r, offs in enumerate(SMALL_OFFSETS):
        nodal = np.polynomial.polynomial.polyfromroots(offs)
        shifted = np.polynomial.polynomial.polymul(nodal, [float(sum(offs)), 1.0])
        rows[1][r] = _kernel_mean(nodal, moments)
        rows[2][r] = _kernel_mean(shifted, moments)
    mat = np.vstack(rows)
    # rows 2 and 3 scale like 1/nu for large nu
    scale = np.abs(mat).max(axis=1, keepdims=True)
    return np.linalg.solve(mat / scale, np.array([1.0, 0.0, 0.0]) / scale[:, 0])


@dataclass(frozen=True)
class QuadratureTable:
    """Quadrature weights of the left-sided cell integral for one ``nu``."""

    nu: float
    small_stencil_weights: np.ndarray  # (3, 4)
    big_stencil_weights: np.ndarray  # (6,)
    linear_weights: np.ndarray  # (3,)
    shifted_weights: dict = field(default_factory=dict)

    @property
    def has_negative_weights(self) -> bool:
        return bool(np.any(self.linear_weights < 0))

    def consistency_residual(self) -> float:
        """Max difference between the big stencil and the d-weighted small ones."""
        combined = np.zeros(6)
        for r in range(3):
            combined[r : r + 4] += self.linear_weights[r] * self.small_stencil_weights[r]
        return float(np.max(np.abs(combined - self.big_stencil_weights)))


@functools.lru_cache(maxsize=256)
def build_quadrature_table(nu: float) -> QuadratureTable:
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if nu < 1e-6:
        logger.warning("quadrature table requested for very small nu=%g", nu)
    m = kernel_moments(nu)
    small = np.array([stencil_weights(offs, m) for offs in SMALL_OFFSETS])
    big = stencil_weights(BIG_OFFSETS, m)
    d = _linear_weights(m)
    shifted = {key: stencil_weights(offs, m) for key, offs in SHIFTED_OFFSETS.items()}
    for arr in (small, big, d):
        arr.setflags(write=False)
    table = QuadratureTable(nu, small, big, d, shifted)
    if table.has_negative_weights:
        logger.info("negative linear weights at nu=%g: %s", nu, d)
    return table


@dataclass
class SmoothnessReport:
    beta0: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    tau5: np.ndarray
    omega: np.ndarray  # (3, ...)
    xi: np.ndarray


def smoothness_indicators(window, linear_weights, eps: float = WENO_EPS) -> SmoothnessReport:
    """Smoothness indicators, WENO-Z weights and the ratio ``xi`` for cells.

    ``window`` holds the six values ``v_{i-3}, ..., v_{i+2}`` along its first
    axis (any trailing shape is allowed).
    """
    vm3, vm2, vm1, v0, vp1, vp2 = (np.asarray(w, dtype=np.float64) for w in window)

    beta0 = (13.0 / 12.0) * (-vm3 + 3 * vm2 - 3 * vm1 + v0) ** 2 \
        + 0.25 * (vm3 - 5 * vm2 + 7 * vm1 - 3 * v0) ** 2
    beta1 = (13.0 / 12.0) * (-vm2 + 3 * vm1 - 3 * v0 + vp1) ** 2 \
        + 0.25 * (vm2 - vm1 - v0 + vp1) ** 2
    beta2 = (13.0 / 12.0) * (-vm1 + 3 * v0 - 3 * vp1 + vp2) ** 2 \
        + 0.25 * (-3 * vm1 + 7 * v0 - 5 * vp1 + vp2) ** 2
    tau5 = np.abs(beta0 - beta2)

    d = np.asarray(linear_weights, dtype=np.float64)
    wt = np.stack([d[r] * (1.0 + tau5 / (eps + b)) for r, b in enumerate((beta0, beta1, beta2))])
    if np.any(d < 0):
        wt = np.maximum(wt, 0.0)
    omega = wt / wt.sum(axis=0)

    lo = np.minimum(beta0, beta2)
    hi = np.maximum(beta0, beta2)
    beta_max = 1.0 + (tau5 / (eps + lo)) ** 2
    beta_min = 1.0 + (tau5 / (eps + hi)) ** 2
    xi = beta_min / beta_max
    return SmoothnessReport(beta0, beta1, beta2, tau5, omega, xi)


def _periodic_pad(v: np.ndarray, width: int = 3) -> np.ndarray:
    return np.concatenate([v[-width:], v, v[:width]], axis=0)


def _weno_cells(padded: np.ndarray, start: int, count: int, table: QuadratureTable):
    """WENO-Z integrals for ``count`` consecutive cells.

    ``padded[start + k]`` must be the node value at offset 0 of cell ``k``.
    """
    window = [padded[start + o : start + o + count] for o in BIG_OFFSETS]
    rep = smoothness_indicators(window, table.linear_weights)
    jr = [
        sum(w * window[j + r] for j, w in enumerate(table.small_stencil_weights[r]))
        for r in range(3)
    ]
    J = rep.omega[0] * jr[0] + rep.omega[1] * jr[1] + rep.omega[2] * jr[2]
    return J, rep.xi


def _linear_cells(padded: np.ndarray, start: int, count: int, table: QuadratureTable):
    out = np.zeros((count,) + padded.shape[1:])
    for j, o in enumerate(BIG_OFFSETS):
        out += table.big_stencil_weights[j] * padded[start + o : start + o + count]
    return out


def _shifted_cell(v: np.ndarray, i: int, key: int, table: QuadratureTable):
    w = table.shifted_weights[key]
    offs = SHIFTED_OFFSETS[key]
    return sum(wj * v[i + o] for wj, o in zip(w, offs))


def cell_integrals_left(v: np.ndarray, nu: float, periodic: bool, weno: bool = True):
    """Left-sided cell integrals along axis 0 of ``v``.

    Returns ``(J, xi)`` with the same shape as ``v``. ``J[i]`` is the
    integral over the cell ending at node ``i``; for periodic lines ``v``
    holds the unique nodes and ``J[0]`` is the wrapped cell ``[x_{-1}, x_0]``.
    For open lines ``J[0] = 0`` and the two cells at each end use the
    shifted linear stencil (``xi = 1`` there).
    """
    v = np.asarray(v, dtype=np.float64)
    table = build_quadrature_table(float(nu))
    n = v.shape[0]
    xi = np.ones_like(v)
    if periodic:
        if n < 6:
            raise ValueError("periodic line needs at least 6 nodes")
        padded = _periodic_pad(v)
        if weno:
            J, xi = _weno_cells(padded, 3, n, table)
        else:
            J = _linear_cells(padded, 3, n, table)
        return J, xi

    N = n - 1
    if N < 6:
        raise ValueError("open line needs at least 7 nodes (N >= 6)")
    J = np.zeros_like(v)
    if weno:
        J[3 : N - 1], xi[3 : N - 1] = _weno_cells(v, 3, N - 4, table)
    else:
        J[3 : N - 1] = _linear_cells(v, 3, N - 4, table)
    for i, key in ((1, 1), (2, 2), (N - 1, -1), (N, 0)):
        J[i] = _shifted_cell(v, i, key, table)
    return J, xi


def mirror(v: np.ndarray, periodic: bool) -> np.ndarray:
    """Reflect a line about its midpoint (node ``i`` maps to node ``N - i``)."""
    if periodic:
        return np.roll(v[::-1], 1, axis=0)
    return v[::-1]


def cell_integrals(v: np.ndarray, nu: float, periodic: bool, direction: str = "L",
                   weno: bool = True):
    """Cell integrals ``J^L`` or ``J^R`` and the ratio ``xi`` along axis 0.

    For ``direction="R"``, ``J[i]`` is the integral over ``[x_i, x_{i+1}]``
    and is computed as the left integral of the mirrored line.
    """
    if direction == "L":
        return cell_integrals_left(v, nu, periodic, weno)
    if direction == "R":
        J, xi = cell_integrals_left(mirror(v, periodic), nu, periodic, weno)
        return mirror(J, periodic), mirror(xi, periodic)
    raise ValueError(f"direction must be 'L' or 'R', got {direction!r}")


def filters(xi: np.ndarray, periodic: bool):
    """Nonlinear filters ``sigma_L[i] = min(xi[i-1], xi[i])`` and its mirror.

    ``xi`` is the left-cell ratio indexed like the output of
    :func:`cell_integrals_left`. The right filter is computed from the
    right-cell ratios of the same data, which for these stencils coincide
    with the left-cell ratios shifted by one node.
    """
    xi = np.asarray(xi)
    if periodic:
        prev = np.roll(xi, 1, axis=0)
        sigma_l = np.minimum(prev, xi)
        # right cell i (nodes i..i+1) sees the same stencil as left cell i+1
        xr = np.roll(xi, -1, axis=0)
        sigma_r = np.minimum(xr, np.roll(xr, -1, axis=0))
        return sigma_l, sigma_r
    ones = np.ones_like(xi[:1])
    prev = np.concatenate([ones, xi[:-1]], axis=0)
    sigma_l = np.minimum(prev, xi)
    xr = np.concatenate([xi[1:], ones], axis=0)
    nxt = np.concatenate([xr[1:], ones], axis=0)
    sigma_r = np.minimum(xr, nxt)
    return sigma_l, sigma_r
