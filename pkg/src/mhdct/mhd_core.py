"""Ideal MHD base scheme.

Conserved variables are stacked as ``q = (rho, mx, my, mz, E, Bx, By, Bz)``
along axis 0. The spatial operator is a finite-difference WENO5 (Jiang-Shu)
discretization of ``q_t + div F(q) = 0`` with componentwise global
Lax-Friedrichs flux splitting, applied dimension by dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._accel import weno5_js_kernel, weno5_z_kernel
from .grid import Grid, pad_axis

GAMMA = 5.0 / 3.0
NVAR = 8
RHO, MX, MY, MZ, ENERGY, BX, BY, BZ = range(NVAR)
FIELD_NAMES = ("rho", "mx", "my", "mz", "E", "Bx", "By", "Bz")

RHO_FLOOR = 1.0e-12
P_FLOOR = 1.0e-12
GHOST = 3
RADICAND_TOL = 1.0e-14


class PositivityError(FloatingPointError):
    """Raised when a state cannot be repaired by the positivity safeguard."""


class ConservedState:
    """Nodal conserved MHD variables with Runge-Kutta friendly arithmetic."""

    __slots__ = ("q", "gamma")

    def __init__(self, q: np.ndarray, gamma: float = GAMMA):
        q = np.asarray(q, dtype=np.float64)
        if q.shape[0] != NVAR:
            raise ValueError(f"expected {NVAR} conserved fields, got {q.shape[0]}")
        self.q = q
        self.gamma = float(gamma)

    @classmethod
    def from_primitive(cls, rho, u: Sequence, p, B: Sequence, gamma: float = GAMMA):
        rho = np.asarray(rho, dtype=np.float64)
        shape = rho.shape
        u = [np.broadcast_to(np.asarray(c, dtype=np.float64), shape) for c in u]
        B = [np.broadcast_to(np.asarray(c, dtype=np.float64), shape) for c in B]
        p = np.broadcast_to(np.asarray(p, dtype=np.float64), shape)
        kin = 0.5 * rho * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2)
        mag = 0.5 * (B[0] ** 2 + B[1] ** 2 + B[2] ** 2)
        E = p / (gamma - 1.0) + kin + mag
        q = np.stack([rho, rho * u[0], rho * u[1], rho * u[2], E, B[0], B[1], B[2]])
        return cls(q, gamma)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.q.shape[1:]

    @property
    def rho(self) -> np.ndarray:
        return self.q[RHO]

    @property
    def mom(self) -> np.ndarray:
        return self.q[MX:MZ + 1]

    @property
    def energy(self) -> np.ndarray:
        return self.q[ENERGY]

    @property
    def bfield(self) -> np.ndarray:
        return self.q[BX:BZ + 1]

    def velocity(self) -> np.ndarray:
        return self.q[MX:MZ + 1] / self.q[RHO]

    def pressure(self) -> np.ndarray:
        return pressure(self.q, self.gamma)

    def copy(self) -> "ConservedState":
        return ConservedState(self.q.copy(), self.gamma)

    def __add__(self, other):
        return ConservedState(self.q + _raw(other), self.gamma)

    __radd__ = __add__

    def __sub__(self, other):
        return ConservedState(self.q - _raw(other), self.gamma)

    def __mul__(self, s):
        return ConservedState(self.q * s, self.gamma)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"ConservedState(shape={self.shape}, gamma={self.gamma:g})"


def _raw(x):
    return x.q if isinstance(x, ConservedState) else x


def pressure(q: np.ndarray, gamma: float = GAMMA) -> np.ndarray:
    """Gas pressure ``(gamma - 1)(E - |B|^2/2 - rho |u|^2/2)``."""
    q = np.asarray(q, dtype=np.float64)
    rho = q[RHO]
    m2 = q[MX] ** 2 + q[MY] ** 2 + q[MZ] ** 2
    b2 = q[BX] ** 2 + q[BY] ** 2 + q[BZ] ** 2
    return (gamma - 1.0) * (q[ENERGY] - 0.5 * b2 - 0.5 * m2 / rho)


def physical_flux(q: np.ndarray, axis: int, gamma: float = GAMMA) -> np.ndarray:
    """Column ``axis`` (0-based) of the ideal MHD flux tensor."""
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    q = np.asarray(q, dtype=np.float64)
    rho = q[RHO]
    u = q[MX:MZ + 1] / rho
    B = q[BX:BZ + 1]
    b2 = B[0] ** 2 + B[1] ** 2 + B[2] ** 2
    p = (gamma - 1.0) * (q[ENERGY] - 0.5 * b2 - 0.5 * rho * (u[0] ** 2 + u[1] ** 2 + u[2] ** 2))
    ptot = p + 0.5 * b2
    un, bn = u[axis], B[axis]
    udotb = u[0] * B[0] + u[1] * B[1] + u[2] * B[2]
    f = np.empty_like(q)
    f[RHO] = q[MX + axis]
    for c in range(3):
        f[MX + c] = q[MX + c] * un - B[c] * bn
    f[MX + axis] += ptot
    f[ENERGY] = (q[ENERGY] + ptot) * un - bn * udotb
    for c in range(3):
        f[BX + c] = un * B[c] - bn * u[c]
    f[BX + axis] = 0.0
    return f


@dataclass(frozen=True)
class WaveSpeeds:
    a: np.ndarray
    c_a: np.ndarray
    c_s: np.ndarray
    c_f: np.ndarray


def _speeds(rho, p, B, bn, gamma):
    a2 = np.maximum(gamma * p / rho, 0.0)
    b2 = (B[0] ** 2 + B[1] ** 2 + B[2] ** 2) / rho
    ca2 = bn ** 2 / rho
    s = a2 + b2
    rad = s * s - 4.0 * a2 * ca2
    scale = np.maximum(s * s, np.finfo(float).tiny)
    if np.any(rad < -RADICAND_TOL * scale):
        raise PositivityError("negative magnetosonic radicand: corrupted state")
    root = np.sqrt(np.maximum(rad, 0.0))
    cf2 = 0.5 * (s + root)
    cs2 = np.maximum(0.5 * (s - root), 0.0)
    return a2, ca2, cs2, cf2


def wave_speeds(q: np.ndarray, n: Sequence[float], gamma: float = GAMMA) -> WaveSpeeds:
    """Sound, Alfven, slow and fast speeds in direction ``n``."""
    n = np.asarray(n, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    q = np.asarray(q, dtype=np.float64)
    rho = q[RHO]
    if np.any(rho <= 0):
        raise PositivityError("non-positive density")
    p = pressure(q, gamma)
    B = q[BX:BZ + 1]
    nb = n.reshape((3,) + (1,) * (B.ndim - 1))
    bn = np.sum(nb * B, axis=0)
    a2, ca2, cs2, cf2 = _speeds(rho, p, B, bn, gamma)
    # cs <= ca <= cf holds analytically; clip the round-off
    ca2 = np.clip(ca2, cs2, cf2)
    return WaveSpeeds(np.sqrt(a2), np.sqrt(ca2), np.sqrt(cs2), np.sqrt(cf2))


def eigenvalues(q: np.ndarray, n: Sequence[float], gamma: float = GAMMA) -> np.ndarray:
    """The eight ordered characteristic speeds ``u.n -+ cf, ca, u.n, cs``."""
    n = np.asarray(n, dtype=np.float64)
    ws = wave_speeds(q, n, gamma)
    u = np.asarray(q[MX:MZ + 1]) / q[RHO]
    un = np.tensordot(n, u, axes=(0, 0))
    return np.stack([un - ws.c_f, un - ws.c_a, un - ws.c_s, un, un,
                     un + ws.c_s, un + ws.c_a, un + ws.c_f])


def fast_speed(q: np.ndarray, axis: int, gamma: float = GAMMA) -> np.ndarray:
    """Fast magnetosonic speed along a coordinate axis."""
    rho = q[RHO]
    p = pressure(q, gamma)
    B = q[BX:BZ + 1]
    *_, cf2 = _speeds(rho, p, B, B[axis], gamma)
    return np.sqrt(cf2)


def max_signal_speed(q: np.ndarray, axis: int, gamma: float = GAMMA) -> float:
    """Grid max of ``|u_axis| + c_f`` (a sequential, deterministic reduction)."""
    return float(np.max(np.abs(q[MX + axis] / q[RHO]) + fast_speed(q, axis, gamma)))


# --------------------------------------------------------------------------
# WENO5 reconstruction


def _shift(a: np.ndarray, axis: int, start: int, count: int) -> np.ndarray:
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, start + count)
    return a[tuple(sl)]


WENO_SCHEMES = {"z": weno5_z_kernel, "js": weno5_js_kernel}
DEFAULT_WENO = "z"


def weno5_left(fm2, fm1, f0, fp1, fp2, scheme: str = DEFAULT_WENO):
    """WENO5 value at ``i + 1/2`` from the left-biased stencil ``f_{i-2} .. f_{i+2}``.

    ``scheme`` selects the nonlinear weights: ``"js"`` (Jiang-Shu) or
    ``"z"`` (``d_r (1 + tau5 / (eps + beta_r))``); both use ``eps = 1e-6``
    and the same smoothness indicators and candidate stencils.
    """
    try:
        kernel = WENO_SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown WENO scheme {scheme!r}") from None
    return kernel(fm2, fm1, f0, fp1, fp2)


def weno5_interfaces(fp: np.ndarray, fm: np.ndarray, axis: int, n: int,
                     scheme: str = DEFAULT_WENO) -> np.ndarray:
    """Numerical flux at the ``n + 1`` interfaces of ``n`` nodes padded by 3.

    ``fp`` and ``fm`` are the split fluxes ``F+`` and ``F-`` on the padded
    nodes; interface ``k`` lies between padded nodes ``k + 2`` and ``k + 3``.
    """
    m = n + 1
    s = lambda a, o: _shift(a, axis, o, m)  # noqa: E731
    plus = weno5_left(s(fp, 0), s(fp, 1), s(fp, 2), s(fp, 3), s(fp, 4), scheme)
    minus = weno5_left(s(fm, 5), s(fm, 4), s(fm, 3), s(fm, 2), s(fm, 1), scheme)
    return plus + minus


def weno5_derivative(f: np.ndarray, axis: int, dx: float, scheme: str = DEFAULT_WENO) -> np.ndarray:
    """Upwind (for positive speed) WENO5 derivative of padded data ``f``."""
    n = f.shape[axis] - 2 * GHOST
    m = n + 1
    s = lambda o: _shift(f, axis, o, m)  # noqa: E731
    flux = weno5_left(s(0), s(1), s(2), s(3), s(4), scheme)
    return (_shift(flux, axis, 1, n) - _shift(flux, axis, 0, n)) / dx


def fill_ghosts(q: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Pad ``q`` (components first) with 3 ghost nodes along ``axis``."""
    return pad_axis(q, axis + 1, GHOST, grid.bcs[axis], degree=0, component_axis=True)


def split_speeds(q: np.ndarray, grid: Grid, gamma: float = GAMMA) -> list[float]:
    """Global Lax-Friedrichs speed per axis, including ghost (inflow) nodes."""
    out = []
    for ax in range(grid.ndim):
        out.append(max_signal_speed(fill_ghosts(q, grid, ax), ax, gamma))
    return out


def _pressure_lower_bound(q: np.ndarray, spread: np.ndarray, gamma: float) -> np.ndarray:
    """Lower bound of ``p(q + v)`` over all ``|v_c| <= spread_c`` (``rho`` kept positive)."""
    rho_lo = q[RHO] - spread[RHO]
    m = np.sqrt(q[MX] ** 2 + q[MY] ** 2 + q[MZ] ** 2) + np.sqrt(np.sum(spread[MX:MZ + 1] ** 2, axis=0))
    b = np.sqrt(q[BX] ** 2 + q[BY] ** 2 + q[BZ] ** 2) + np.sqrt(np.sum(spread[BX:BZ + 1] ** 2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        kin = np.where(rho_lo > 0, 0.5 * m * m / rho_lo, np.inf)
    return (gamma - 1.0) * (q[ENERGY] - spread[ENERGY] - kin - 0.5 * b * b)


def cell_limiter_bounds(q_low: np.ndarray, contributions: Sequence[np.ndarray], gamma: float,
                        eps_rho: float = RHO_FLOOR, eps_p: float = P_FLOOR) -> np.ndarray:
    """Per-node bound ``L`` such that ``q_low + sum_f theta_f c_f`` keeps
    ``rho >= eps_rho`` and ``p >= eps_p`` for every ``theta_f`` in ``[0, L]``.

    Pressure is concave and the update affine in the ``theta_f``, so it is
    enough to check the vertices of the box. Nodes that pass a cheap
    sufficient test skip the vertex enumeration.
    """
    shape = q_low.shape[1:]
    c = np.stack(contributions)  # (faces, 8, *shape)
    neg_rho = np.sum(np.minimum(c[:, RHO], 0.0), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_rho = np.where(neg_rho < 0, (q_low[RHO] - eps_rho) / -neg_rho, 1.0)
    lam_rho = np.clip(lam_rho, 0.0, 1.0)
    bound = lam_rho.copy()
    safe = (lam_rho >= 1.0) & (_pressure_lower_bound(q_low, np.sum(np.abs(c), axis=0), gamma) >= eps_p)
    idx = np.nonzero(~safe.ravel())[0]
    if idx.size == 0:
        return bound
    ql = q_low.reshape(NVAR, -1)[:, idx]
    cf = c.reshape(c.shape[0], NVAR, -1)[:, :, idx]
    lr = lam_rho.ravel()[idx]
    p0 = pressure(ql, gamma)
    lam = lr.copy()
    nf = cf.shape[0]
    for mask in range(1, 1 << nf):
        v = sum(cf[f] for f in range(nf) if mask >> f & 1)
        p1 = pressure(ql + lr * v, gamma)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p1 >= eps_p, 1.0, (p0 - eps_p) / (p0 - p1))
        lam = np.minimum(lam, lr * np.clip(np.nan_to_num(t, nan=0.0), 0.0, 1.0))
    lam = np.where(p0 >= eps_p, lam, 0.0)
    out = bound.ravel()
    out[idx] = lam
    return out.reshape(shape)


def _face_theta(bound: np.ndarray, grid: Grid, ax: int) -> np.ndarray:
    # theta on the n + 1 faces along ax: min of the two adjacent node bounds
    padded = pad_axis(bound, ax, 1, grid.bcs[ax], degree=0, component_axis=False, inflow=False)
    n = grid.shape[ax]
    return np.minimum(_shift(padded, ax, 0, n + 1), _shift(padded, ax, 1, n + 1))


def mhd_rhs(state: ConservedState, grid: Grid, lam: Sequence[float] | None = None,
            scheme: str = DEFAULT_WENO, dt: float | None = None, stats: dict | None = None):
    """Semi-discrete ``-div F`` by WENO5 with global LF flux splitting.

    ``lam`` overrides the per-axis splitting speeds (default: grid max of
    ``|u_axis| + c_f``). ``scheme`` selects the WENO weights.

    When ``dt`` is given, interface fluxes are blended with first-order LF
    fluxes, ``theta F + (1 - theta) F_LF``, with ``theta`` as large as
    possible such that a forward Euler step of size ``dt`` keeps density
    and pressure above the floors wherever the first-order update does.
    ``stats["limited"]`` then counts the faces with ``theta < 1``.
    """
    q = state.q
    if q.shape[1:] != grid.shape:
        raise ValueError(f"state shape {q.shape[1:]} does not match grid {grid.shape}")
    gamma = state.gamma
    padded = [fill_ghosts(q, grid, ax) for ax in range(grid.ndim)]
    if lam is None:
        lam = [max_signal_speed(padded[ax], ax, gamma) for ax in range(grid.ndim)]
    high, low = [], []
    for ax in range(grid.ndim):
        p = padded[ax]
        lm = float(lam[ax])
        f = physical_flux(p, ax, gamma)
        fp = 0.5 * (f + lm * p)
        fm = 0.5 * (f - lm * p)
        n = grid.shape[ax]
        high.append(weno5_interfaces(fp, fm, ax + 1, n, scheme))
        if dt is not None:
            m = n + 1
            qa, qb = _shift(p, ax + 1, 2, m), _shift(p, ax + 1, 3, m)
            fa, fb = _shift(f, ax + 1, 2, m), _shift(f, ax + 1, 3, m)
            low.append(0.5 * (fa + fb) - 0.5 * lm * (qb - qa))

    if dt is not None:
        q_low = q.copy()
        contributions = []
        for ax in range(grid.ndim):
            n, r = grid.shape[ax], dt / grid.spacing[ax]
            q_low -= r * (_shift(low[ax], ax + 1, 1, n) - _shift(low[ax], ax + 1, 0, n))
            d = high[ax] - low[ax]
            contributions.append(r * _shift(d, ax + 1, 0, n))
            contributions.append(-r * _shift(d, ax + 1, 1, n))
        bound = cell_limiter_bounds(q_low, contributions, gamma)
        for ax in range(grid.ndim):
            theta = _face_theta(bound, grid, ax)
            limited = theta < 1.0
            count = int(np.count_nonzero(limited))
            if count:
                high[ax] = np.where(limited, low[ax] + theta * (high[ax] - low[ax]), high[ax])
            if stats is not None:
                stats["limited"] = stats.get("limited", 0) + count

    rhs = np.zeros_like(q)
    for ax in range(grid.ndim):
        n = grid.shape[ax]
        flux = high[ax]
        div = (_shift(flux, ax + 1, 1, n) - _shift(flux, ax + 1, 0, n)) / grid.spacing[ax]
        rhs -= div
    return rhs


# --------------------------------------------------------------------------
# time stepping


def ssp_rk_step(y, rhs: Callable, dt: float, order: int = 3, post: Callable | None = None):
    """One strong-stability-preserving Runge-Kutta step.

    ``y`` is anything supporting ``+`` and scalar ``*`` (arrays, states,
    potentials or tuples of them). ``post`` is applied to each stage value
    (for instance a positivity safeguard).
    """
    post = post or (lambda z: z)
    if order == 1:
        return post(_axpy(1.0, y, dt, rhs(y)))
    if order == 2:
        y1 = post(_axpy(1.0, y, dt, rhs(y)))
        return post(_comb(0.5, y, 0.5, _axpy(1.0, y1, dt, rhs(y1))))
    if order == 3:
        y1 = post(_axpy(1.0, y, dt, rhs(y)))
        y2 = post(_comb(0.75, y, 0.25, _axpy(1.0, y1, dt, rhs(y1))))
        return post(_comb(1.0 / 3.0, y, 2.0 / 3.0, _axpy(1.0, y2, dt, rhs(y2))))
    raise ValueError("order must be 1, 2 or 3")


def _axpy(a, x, b, z):
    if isinstance(x, tuple):
        return tuple(_axpy(a, xi, b, zi) for xi, zi in zip(x, z))
    return x + b * z if a == 1.0 else a * x + b * z


def _comb(a, x, b, z):
    # convex combination a x + b z (a + b = 1) written as x + b (z - x),
    # so that z == x returns x bitwise
    if isinstance(x, tuple):
        return tuple(_comb(a, xi, b, zi) for xi, zi in zip(x, z))
    return x + b * (z - x)


def compute_dt(state: ConservedState, grid: Grid, cfl: float = 0.5) -> float:
    """``dt = CFL / (em * cd)`` with ``cd = sum 1/dx_d`` and ``em`` the
    grid max of ``|u_d| + c_f`` over the coordinate directions."""
    if cfl <= 0:
        raise ValueError("CFL must be positive")
    em = max(max_signal_speed(state.q, ax, state.gamma) for ax in range(grid.ndim))
    if not np.isfinite(em):
        raise PositivityError("non-finite signal speed")
    if em == 0.0:
        raise ValueError("zero signal speed: the caller must supply dt")
    cd = sum(1.0 / h for h in grid.spacing)
    return cfl / (em * cd)


# --------------------------------------------------------------------------
# positivity safeguard


def _neighbour_mean(q: np.ndarray, grid: Grid) -> np.ndarray:
    total = q.copy()
    count = 1
    for ax in range(grid.ndim):
        p = pad_axis(q, ax + 1, 1, grid.bcs[ax], degree=0, component_axis=True)
        n = grid.shape[ax]
        total += _shift(p, ax + 1, 0, n) + _shift(p, ax + 1, 2, n)
        count += 2
    return total / count


def apply_positivity(state: ConservedState, grid: Grid, rho_floor: float = RHO_FLOOR,
                     p_floor: float = P_FLOOR) -> tuple[ConservedState, int]:
    """Pull nodes with ``rho`` or ``p`` below the floors toward the local mean.

    A node ``q`` is replaced by ``qbar + theta (q - qbar)``, where ``qbar``
    is the mean over the node and its axis neighbours and ``theta`` is the
    largest value in ``[0, 1]`` that restores both floors. Pressure is
    concave in ``q``, so the linear estimate of ``theta`` is safe. If the
    mean itself violates a floor the node is reset to the floored mean.
    Returns the repaired state and the number of modified nodes.
    """
    q = state.q
    gamma = state.gamma
    p = pressure(q, gamma)
    bad = (q[RHO] < rho_floor) | (p < p_floor) | ~np.isfinite(p)
    nbad = int(np.count_nonzero(bad))
    if nbad == 0:
        return state, 0
    qbar = _neighbour_mean(q, grid)
    qb = qbar[:, bad]
    qn = q[:, bad]
    if not np.all(np.isfinite(qn)):
        raise PositivityError("non-finite state")
    rb, rn = qb[RHO], qn[RHO]
    pb, pn = pressure(qb, gamma), pressure(qn, gamma)
    theta = np.ones_like(rb)
    low = rn < rho_floor
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(low, (rb - rho_floor) / (rb - rn), theta)
    theta = np.clip(theta, 0.0, 1.0)
    fixed = qb + theta * (qn - qb)
    pf = pressure(fixed, gamma)
    lowp = pf < p_floor
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(lowp, (pb - p_floor) / (pb - pf), 1.0)
    theta = theta * np.clip(tp, 0.0, 1.0)
    fixed = qb + theta * (qn - qb)
    # the mean itself is not admissible: floor density, then lift the energy
    r = fixed[RHO]
    fixed[RHO] = np.maximum(r, rho_floor)
    pf = pressure(fixed, gamma)
    # target twice the floor so round-off cannot leave p just below it
    lift = np.where(pf < p_floor, (2.0 * p_floor - pf) / (gamma - 1.0), 0.0)
    fixed[ENERGY] += lift
    out = q.copy()
    out[:, bad] = fixed
    return ConservedState(out, gamma), nbad
