"""Successive-convolution derivative operators on uniform grid lines.

The one-sided operators

.. math::

    \\mathcal{L}_L^{-1}[v](x) = \\alpha \\int_a^x e^{-\\alpha (x - y)} v(y)\\,dy
        + A_L e^{-\\alpha (x - a)}, \\qquad
    \\mathcal{D}_L = \\mathcal{I} - \\mathcal{L}_L^{-1},

(and their mirror images :math:`\\mathcal{L}_R`, :math:`\\mathcal{D}_R`) are
evaluated in O(N) with the exponential recursion for the convolution
integrals. Partial sums of :math:`\\mathcal{D}_L^p` give left/right biased
approximations of :math:`\\partial_x` that are accurate to
:math:`O((1/\\alpha)^k)` and unconditionally stable under the matching
SSP Runge-Kutta method when :math:`\\alpha = \\beta / (c \\Delta t)`.

All batched routines act along axis 0 of their array argument; trailing
axes index independent lines. Periodic lines store the ``N`` unique nodes
``x_0 .. x_{N-1}`` (``x_N`` is the image of ``x_0``), open lines store all
``N + 1`` nodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._accel import left_recursion
from .weno_quad import cell_integrals, cell_integrals_left, filters, mirror

#: stability bound on beta for the 1D linear problem, per order k
BETA_MAX = {1: 2.0, 2: 1.0, 3: 1.243}

#: relative speed floor used when the max wave speed vanishes
SPEED_FLOOR = 1.0e-8


class ClosureKind(str, Enum):
    PERIODIC = "periodic"
    OUTFLOW = "outflow"


class BetaBoundError(ValueError):
    pass


def beta_max(order_k: int, ndim: int = 1) -> float:
    """Largest stable beta for order ``k`` in ``ndim`` space dimensions."""
    if order_k not in BETA_MAX:
        raise ValueError(f"order_k must be 1, 2 or 3, got {order_k}")
    return BETA_MAX[order_k] / ndim


@dataclass(frozen=True)
class Line:
    """Node values on ``[a, b]`` with ``N + 1`` uniform nodes."""

    values: np.ndarray
    spacing: float
    a: float = 0.0

    def __post_init__(self):
        if self.values.ndim < 1 or self.values.shape[0] < 7:
            raise ValueError("a line needs N + 1 >= 7 nodes")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def b(self) -> float:
        return self.a + self.N * self.spacing

    @property
    def length(self) -> float:
        return self.N * self.spacing

    @property
    def x(self) -> np.ndarray:
        return self.a + self.spacing * np.arange(self.N + 1)


@dataclass(frozen=True)
class KernelParams:
    beta: float
    order_k: int
    c_max: float
    dt: float
    alpha: float
    nu: float
    mu: float


def make_kernel_params(beta: float, order_k: int, c_max: float, dt: float,
                       spacing: float, length: float, ndim: int = 1,
                       strict: bool = True) -> KernelParams:
    """Kernel parameters ``alpha = beta / (c dt)``, ``nu = alpha dx`` and
    ``mu = exp(-alpha (b - a))``.

    A vanishing ``c_max`` is replaced by ``SPEED_FLOOR * length / dt``, which
    turns the operators into a near-exact derivative.
    """
    if order_k not in BETA_MAX:
        raise ValueError(f"order_k must be 1, 2 or 3, got {order_k}")
    if not (beta > 0 and dt > 0 and c_max >= 0):
        raise ValueError("need beta > 0, dt > 0 and c_max >= 0")
    bound = beta_max(order_k, ndim)
    if beta > bound * (1 + 1e-12):
        msg = f"beta={beta} exceeds the stability bound {bound} (k={order_k}, d={ndim})"
        if strict:
            raise BetaBoundError(msg)
        warnings.warn(msg, stacklevel=2)
    c_eff = max(c_max, SPEED_FLOOR * length / dt)
    alpha = beta / (c_eff * dt)
    nu = alpha * spacing
    mu = math.exp(-alpha * length)
    return KernelParams(beta, order_k, c_max, dt, alpha, nu, mu)


def params_for_line(beta: float, order_k: int, c_max: float, dt: float, line: Line,
                    ndim: int = 1, strict: bool = True) -> KernelParams:
    return make_kernel_params(beta, order_k, c_max, dt, line.spacing, line.length,
                              ndim=ndim, strict=strict)


@dataclass(frozen=True)
class BoundaryClosure:
    """How a line is closed at its ends.

    For outflow closures ``left[m-1]`` and ``right[m-1]`` hold ``d^m A/dx^m``
    at ``a`` and ``b`` for ``m = 1..k``.
    """

    kind: ClosureKind
    left: np.ndarray | None = None
    right: np.ndarray | None = None

    @classmethod
    def periodic(cls) -> "BoundaryClosure":
        return cls(ClosureKind.PERIODIC)

    @property
    def is_periodic(self) -> bool:
        return self.kind == ClosureKind.PERIODIC


# --------------------------------------------------------------------------
# recursion and the three kernel operators (batched, axis 0)


def accumulate(J: np.ndarray, nu: float, direction: str = "L") -> np.ndarray:
    """Convolution integrals from cell integrals by the exponential recursion.

    Direction ``L``: ``I[0] = 0`` and ``I[i] = e^{-nu} I[i-1] + J[i]``.
    Direction ``R``: ``I[N] = 0`` and ``I[i] = e^{-nu} I[i+1] + J[i]``.
    """
    J = np.asarray(J, dtype=np.float64)
    decay = math.exp(-nu)
    if direction == "L":
        return left_recursion(J, decay)
    if direction == "R":
        return left_recursion(J[::-1], decay)[::-1]
    raise ValueError(f"direction must be 'L' or 'R', got {direction!r}")


def _periodic_il(J: np.ndarray, nu: float) -> tuple[np.ndarray, np.ndarray]:
    # J[0] is the wrapped cell ending at x_N; recurse over x_0..x_N
    ext = np.concatenate([np.zeros_like(J[:1]), J[1:], J[:1]], axis=0)
    I = accumulate(ext, nu, "L")
    return I[:-1], I[-1]


def _decay_profile(nu: float, n: int, ndim: int) -> np.ndarray:
    e = np.exp(-nu * np.arange(n))
    return e.reshape((n,) + (1,) * (ndim - 1))


def _left_conv(v: np.ndarray, nu: float, periodic: bool, weno: bool):
    """Return ``(I, I_end, xi)``: convolution values, the value at ``b``."""
    J, xi = cell_integrals_left(v, nu, periodic, weno)
    if periodic:
        I, I_end = _periodic_il(J, nu)
    else:
        I = accumulate(J, nu, "L")
        I_end = I[-1]
    return I, I_end, xi


def apply_dl(v: np.ndarray, nu: float, periodic: bool, c_left=None, weno: bool = False,
             return_xi: bool = False):
    """``D_L[v] = v - I^L - A_L exp(-alpha (x - a))`` at every node.

    Periodic lines use ``A_L = I^L(b) / (1 - mu)``. Open lines impose
    ``D_L[v](a) = c_left`` through ``A_L = v(a) - c_left``.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    I, I_end, xi = _left_conv(v, nu, periodic, weno)
    if periodic:
        coef = I_end / (-math.expm1(-nu * n))
    else:
        c = 0.0 if c_left is None else c_left
        coef = v[0] - c
    out = v - I - coef * _decay_profile(nu, n, v.ndim)
    return (out, xi) if return_xi else out


def apply_dr(v: np.ndarray, nu: float, periodic: bool, c_right=None, weno: bool = False,
             return_xi: bool = False):
    """``D_R[v] = v - I^R - B_R exp(-alpha (b - x))``; the mirror of :func:`apply_dl`."""
    res = apply_dl(mirror(v, periodic), nu, periodic, c_right, weno, return_xi)
    if return_xi:
        return mirror(res[0], periodic), mirror(res[1], periodic)
    return mirror(res, periodic)


def apply_d0(v: np.ndarray, nu: float, periodic: bool, c_left=0.0, c_right=0.0) -> np.ndarray:
    """Two-sided operator ``D_0[v] = v - I^0 - A_0 e^{-alpha(x-a)} - B_0 e^{-alpha(b-x)}``.

    ``I^0 = (I^L + I^R) / 2`` reuses the one-sided linear quadratures.
    Open lines impose ``D_0[v](a) = c_left`` and ``D_0[v](b) = c_right``.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    IL, IL_end, _ = _left_conv(v, nu, periodic, False)
    IRm, IR_end, _ = _left_conv(mirror(v, periodic), nu, periodic, False)
    IR = mirror(IRm, periodic)
    if periodic:
        # I^R jumps at the seam: at x_0 it is the full integral I^R(a)
        IR[0] = IR_end
    I0 = 0.5 * (IL + IR)
    e_left = _decay_profile(nu, n, v.ndim)
    if periodic:
        # distances are measured from x_0 and from its image x_N
        e_right = np.exp(-nu * (n - np.arange(n))).reshape(e_left.shape)
        one_minus_mu = -math.expm1(-nu * n)
        A0 = 0.5 * IL_end / one_minus_mu
        B0 = 0.5 * IR_end / one_minus_mu
    else:
        e_right = e_left[::-1]
        mu = math.exp(-nu * (n - 1))
        P = I0[0] - v[0] + c_left
        Q = I0[-1] - v[-1] + c_right
        denom = -math.expm1(-2.0 * nu * (n - 1))
        A0 = (mu * Q - P) / denom
        B0 = (mu * P - Q) / denom
    return v - I0 - A0 * e_left - B0 * e_right


# --------------------------------------------------------------------------
# boundary derivatives and biased derivatives


def _extrapolation_weights(npts: int, order_k: int) -> np.ndarray:
    # rows m = 1..k: d^m/ds^m at s = 0 of the interpolant through s = 0..npts-1
    s = np.arange(npts, dtype=np.float64)
    vander = s[None, :] ** np.arange(npts)[:, None]  # (q, j)
    inv = np.linalg.inv(vander.T)  # coefficients c_q = sum_j inv[q, j] v_j
    return np.array([math.factorial(m) * inv[m] for m in range(1, order_k + 1)])


def boundary_derivatives(v: np.ndarray, spacing: float, order_k: int):
    """One-sided derivatives ``d^m v`` (m = 1..k) at both ends of open lines.

    Uses the degree ``k + 2`` polynomial through the ``k + 3`` nodes nearest
    each end. Returns ``(left, right)`` shaped ``(k,) + v.shape[1:]``.
    """
    v = np.asarray(v, dtype=np.float64)
    npts = order_k + 3
    if v.shape[0] < npts:
        raise ValueError(f"need at least {npts} nodes for order {order_k}")
    W = _extrapolation_weights(npts, order_k)
    scale = spacing ** np.arange(1, order_k + 1)
    scale = scale.reshape((order_k,) + (1,) * (v.ndim - 1))
    left = _weighted_rows(W, v[:npts]) / scale
    # the right end is the left end of the mirrored line, with d/dx -> -d/dx
    sign = ((-1.0) ** np.arange(1, order_k + 1)).reshape(scale.shape)
    right = sign * _weighted_rows(W, v[::-1][:npts]) / scale
    return left, right


def _weighted_rows(W: np.ndarray, v: np.ndarray) -> np.ndarray:
    # W @ v along axis 0, summed node by node so batching cannot change the result
    shape = (W.shape[0],) + (1,) * (v.ndim - 1)
    out = W[:, 0].reshape(shape) * v[0]
    for j in range(1, W.shape[1]):
        out = out + W[:, j].reshape(shape) * v[j]
    return out


def extrapolate_boundary_derivatives(line: Line, order_k: int):
    return boundary_derivatives(line.values, line.spacing, order_k)


def _minus_sum(v: np.ndarray, nu: float, order_k: int, periodic: bool, dx: float,
               left_derivs=None) -> np.ndarray:
    """Left-biased derivative approximation along axis 0 (times 1, not 1/alpha)."""
    alpha = nu / dx
    n = v.shape[0]
    if periodic:
        d1, xi = apply_dl(v, nu, True, weno=True, return_xi=True)
        out = alpha * d1
        if order_k >= 2:
            d2 = apply_dl(d1, nu, True)
            out = out + alpha * d2
        if order_k >= 3:
            sigma_l, _ = filters(xi, True)
            d3 = apply_dl(d2, nu, True)
            out = out + alpha * sigma_l * d3 - alpha * apply_d0(d2, nu, True)
        return out

    if left_derivs is None:
        left_derivs = boundary_derivatives(v, dx, order_k)[0]
    e_left = _decay_profile(nu, n, v.ndim)
    d1, xi = apply_dl(v, nu, False, c_left=left_derivs[0] / alpha, weno=True,
                      return_xi=True)
    out = alpha * d1
    if order_k >= 2:
        corr = sum((-1.0 / alpha) ** m * left_derivs[m - 1] for m in range(2, order_k + 1))
        a12 = d1 - corr * e_left
        d2 = apply_dl(a12, nu, False, c_left=0.0)
        out = out + alpha * d2
    if order_k >= 3:
        corr = sum((m - 1) * (-1.0 / alpha) ** m * left_derivs[m - 1]
                   for m in range(2, order_k + 1))
        a13 = d2 + corr * e_left
        sigma_l, _ = filters(xi, False)
        d3 = apply_dl(a13, nu, False, c_left=0.0)
        out = out + alpha * sigma_l * d3 - alpha * apply_d0(a13, nu, False)
    return out


def biased_derivatives(v: np.ndarray, nu: float, order_k: int, periodic: bool, dx: float,
                       prescribed=(None, None)):
    """Left- and right-biased approximations of ``dv/dx`` along axis 0.

    The right-biased value is the negated left-biased value of the mirrored
    line, so the two are exact mirror images of each other. On open lines
    ``prescribed`` may replace the extrapolated derivatives ``d^m v``
    (m = 1..k) at the left and/or right end.
    """
    if order_k not in BETA_MAX:
        raise ValueError(f"order_k must be 1, 2 or 3, got {order_k}")
    v = np.asarray(v, dtype=np.float64)
    left = right = None
    if not periodic:
        left, right = boundary_derivatives(v, dx, order_k)
        given = [None if g is None else
                 np.broadcast_to(np.asarray(g, dtype=np.float64).reshape(
                     (order_k,) + (1,) * (v.ndim - 1)), left.shape)
                 for g in prescribed]
        left = left if given[0] is None else given[0]
        right = right if given[1] is None else given[1]
        # mirrored line: d^m/dx'^m = (-1)^m d^m/dx^m
        sign = ((-1.0) ** np.arange(1, order_k + 1)).reshape((order_k,) + (1,) * (v.ndim - 1))
        right = sign * right
    minus = _minus_sum(v, nu, order_k, periodic, dx, left)
    plus = -mirror(_minus_sum(mirror(v, periodic), nu, order_k, periodic, dx, right), periodic)
    return minus, plus


# --------------------------------------------------------------------------
# single-line API: lines carry all N + 1 nodes, periodic ones with v(b) = v(a)


def _unique(line: Line, closure: BoundaryClosure) -> np.ndarray:
    return line.values[:-1] if closure.is_periodic else line.values


def _restore(out: np.ndarray, closure: BoundaryClosure) -> np.ndarray:
    if closure.is_periodic:
        return np.concatenate([out, out[:1]], axis=0)
    return out


def apply_D(line: Line, params: KernelParams, closure: BoundaryClosure, direction: str = "L",
            boundary_value: float = 0.0) -> np.ndarray:
    """``D_L`` or ``D_R`` with WENO quadrature (the first-composition operator)."""
    v = _unique(line, closure)
    periodic = closure.is_periodic
    if direction == "L":
        out = apply_dl(v, params.nu, periodic, c_left=boundary_value, weno=True)
    elif direction == "R":
        out = apply_dr(v, params.nu, periodic, c_right=boundary_value, weno=True)
    else:
        raise ValueError(f"direction must be 'L' or 'R', got {direction!r}")
    return _restore(out, closure)


def apply_D0(line: Line, params: KernelParams, closure: BoundaryClosure,
             c_left: float = 0.0, c_right: float = 0.0) -> np.ndarray:
    v = _unique(line, closure)
    return _restore(apply_d0(v, params.nu, closure.is_periodic, c_left, c_right), closure)


def biased_derivative(line: Line, params: KernelParams, closure: BoundaryClosure,
                      side: str = "minus") -> np.ndarray:
    """Kernel approximation of ``dA/dx`` biased to the left (``minus``) or right."""
    if side not in ("minus", "plus"):
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    v = _unique(line, closure)
    periodic = closure.is_periodic
    k = params.order_k
    given = (None, None)
    if not periodic:
        given = tuple(None if g is None else np.asarray(g, dtype=np.float64)[:k]
                      for g in (closure.left, closure.right))
    minus, plus = biased_derivatives(v, params.nu, k, periodic, line.spacing, given)
    return _restore(minus if side == "minus" else plus, closure)


def convolution(line: Line, params: KernelParams, direction: str = "L", weno: bool = True):
    """Raw convolution integrals ``I^L`` or ``I^R`` (no boundary terms) for an open line."""
    J, _ = cell_integrals(line.values, params.nu, False, direction, weno)
    return accumulate(J, params.nu, direction)
