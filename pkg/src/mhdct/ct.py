"""Unstaggered constrained transport.

The MHD state and the magnetic potential are advanced together with a
shared SSP Runge-Kutta method. After the step the magnetic field is
replaced by the fourth-order central-difference curl of the potential, and
the total energy is optionally corrected so the pressure is unchanged.
Because the central difference operators along different axes commute,
the discrete divergence of that curl vanishes to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mhd_core as mc
from .grid import Grid, pad_all, pad_axis
from .hj_potential import PotentialField, VelocitySnapshot, inflow_slope, potential_rhs
from .kernel_ops import beta_max

CURL_GHOST = 2
POTENTIAL_GHOST = 2 * CURL_GHOST  # curl, then divergence of the curl
EXTRAPOLATION_DEGREE = 3


class NumericalFailure(FloatingPointError):
    """Non-finite or unrepairable values, with step and stage context."""

    def __init__(self, msg: str, step: int | None = None, stage: int | None = None):
        super().__init__(f"{msg} (step={step}, stage={stage})")
        self.step = step
        self.stage = stage


@dataclass(frozen=True)
class CtConfig:
    """Coupled-step settings.

    ``energy_option`` 1 keeps the predicted total energy, 2 keeps the
    pressure fixed across the field replacement. ``cadence`` is ``"step"``
    (replace after the final stage) or ``"stage"`` (after every stage).
    """

    energy_option: int = 1
    cadence: str = "step"
    order_k: int = 3
    beta: float | None = None  # default: the stability bound for the dimension
    rk_order: int = 3
    local_c: bool = False
    positivity: bool = True
    weno: str = mc.DEFAULT_WENO
    flux_limiter: bool = True
    diffusion_limiter: bool = False
    curl_order: int = field(default=4, init=False)

    def __post_init__(self):
        if self.energy_option not in (1, 2):
            raise ValueError("energy_option must be 1 or 2")
        if self.cadence not in ("step", "stage"):
            raise ValueError("cadence must be 'step' or 'stage'")
        if self.order_k not in (1, 2, 3):
            raise ValueError("order_k must be 1, 2 or 3")
        if self.rk_order not in (1, 2, 3):
            raise ValueError("rk_order must be 1, 2 or 3")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.weno not in mc.WENO_SCHEMES:
            raise ValueError(f"weno must be one of {sorted(mc.WENO_SCHEMES)}")
        if self.diffusion_limiter:
            raise NotImplementedError("the diffusion limiter is a placeholder and is not available")

    def beta_for(self, ndim: int) -> float:
        return beta_max(self.order_k, ndim) if self.beta is None else self.beta


@dataclass(frozen=True)
class DivergenceReport:
    max_abs_div: float
    l2_div: float
    max_b: float
    step: int = 0
    time: float = 0.0

    @property
    def relative(self) -> float:
        return self.max_abs_div / self.max_b if self.max_b > 0 else self.max_abs_div


# --------------------------------------------------------------------------
# difference operators


def _trim(a: np.ndarray, axis: int, w: int) -> np.ndarray:
    if w == 0:
        return a
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(w, a.shape[axis] - w)
    return a[tuple(sl)]


def central_diff4(f: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    """Five-point fourth-order derivative along ``axis``.

    ``f`` carries two ghost layers on both ends of ``axis``; the result
    covers the remaining nodes.
    """
    n = f.shape[axis] - 2 * CURL_GHOST
    if n <= 0:
        raise ValueError("need at least one node inside the two ghost layers")
    s = lambda o: mc._shift(f, axis, o, n)  # noqa: E731
    # paired differences: constants give exactly zero
    return (8.0 * (s(3) - s(1)) - (s(4) - s(0))) / (12.0 * spacing)


def _d(f: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    # derivative along `axis`, trimming the other axes to the same region
    out = central_diff4(f, axis, grid.spacing[axis])
    for ax in range(grid.ndim):
        if ax != axis:
            out = _trim(out, ax, CURL_GHOST)
    return out


def pad_potential(A: PotentialField, grid: Grid, width: int = POTENTIAL_GHOST) -> np.ndarray:
    """Ghost-fill the potential: periodic wrap, cubic extrapolation on outflow
    faces, and the prescribed inflow slope (linear) on inflow faces."""
    a = A.a
    comps = (2,) if A.ncomp == 1 else (0, 1, 2)
    for ax in range(grid.ndim):
        a = pad_axis(a, ax + 1, width, grid.bcs[ax], EXTRAPOLATION_DEGREE, inflow=False)
        h = grid.spacing[ax]
        n = a.shape[ax + 1]
        offsets = np.arange(width, 0, -1, dtype=np.float64) * h  # farthest ghost first
        for side in (0, 1):
            for i, c in enumerate(comps):
                g = inflow_slope(grid, ax, side, c)
                if g is None:
                    continue
                comp = np.moveaxis(a[i], ax, 0)  # view into a
                if side == 0:
                    edge = comp[width]
                    comp[:width] = edge - g * offsets.reshape((-1,) + (1,) * edge.ndim)
                else:
                    edge = comp[n - width - 1]
                    comp[n - width:] = edge + g * offsets[::-1].reshape((-1,) + (1,) * edge.ndim)
    return a


def curl_padded(a: np.ndarray, grid: Grid) -> np.ndarray:
    """Curl of padded potential components; the result loses two layers."""
    if grid.ndim == 2:
        a3 = a[-1]
        return np.stack([_d(a3, 1, grid), -_d(a3, 0, grid)])
    if grid.ndim == 3:
        a1, a2, a3 = a
        return np.stack([_d(a3, 1, grid) - _d(a2, 2, grid),
                         _d(a1, 2, grid) - _d(a3, 0, grid),
                         _d(a2, 0, grid) - _d(a1, 1, grid)])
    raise ValueError("curl needs a 2D or 3D grid")


def divergence_padded(b: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(_d(b[ax], ax, grid) for ax in range(grid.ndim))


def curl(A: PotentialField, grid: Grid) -> np.ndarray:
    """Nodal discrete curl: ``(Dy A3, -Dx A3)`` in 2D, the full curl in 3D."""
    b = curl_padded(pad_potential(A, grid, CURL_GHOST), grid)
    return b


def _report(div: np.ndarray, bmag: np.ndarray, step: int, time: float) -> DivergenceReport:
    return DivergenceReport(float(np.max(np.abs(div))), float(np.sqrt(np.mean(div ** 2))),
                            float(np.max(bmag)), step, time)


def discrete_divergence(B: np.ndarray, grid: Grid, step: int = 0, time: float = 0.0):
    """Divergence of a nodal field ``B`` (components first) with the curl's
    operators. Open faces are ghost-filled by cubic extrapolation."""
    B = np.asarray(B, dtype=np.float64)
    padded = pad_all(B[:grid.ndim], grid, CURL_GHOST, degree=EXTRAPOLATION_DEGREE,
                     inflow=False)
    div = divergence_padded(padded, grid)
    return div, _report(div, np.sqrt(np.sum(B ** 2, axis=0)), step, time)


def curl_with_divergence(A: PotentialField, grid: Grid, bz: np.ndarray | None = None,
                         step: int = 0, time: float = 0.0):
    """Nodal curl of ``A`` together with the divergence report of that curl.

    The divergence near open faces uses the curl of the extrapolated
    potential as ghost values, so the identity holds there too.
    """
    bext = curl_padded(pad_potential(A, grid, POTENTIAL_GHOST), grid)
    div = divergence_padded(bext, grid)
    b = np.stack([_trim_all(c, grid) for c in bext])
    mag2 = np.sum(b ** 2, axis=0)
    if bz is not None:
        mag2 = mag2 + bz ** 2
    return b, _report(div, np.sqrt(mag2), step, time)


def _trim_all(a: np.ndarray, grid: Grid) -> np.ndarray:
    for ax in range(grid.ndim):
        a = _trim(a, ax, CURL_GHOST)
    return a


# --------------------------------------------------------------------------
# coupled step


def energy_correct(E_star: np.ndarray, B_star: np.ndarray, B_new: np.ndarray, option: int):
    """Option 1 keeps ``E*``; option 2 adds ``(|B_new|^2 - |B*|^2) / 2``."""
    if option == 1:
        return E_star
    if option == 2:
        return E_star + 0.5 * (np.sum(B_new ** 2, axis=0) - np.sum(B_star ** 2, axis=0))
    raise ValueError("option must be 1 or 2")


def replace_field(state: mc.ConservedState, A: PotentialField, grid: Grid, option: int,
                  step: int = 0, time: float = 0.0):
    """Overwrite the magnetic field with the curl of ``A`` and fix the energy."""
    q = state.q.copy()
    b_star = q[mc.BX:mc.BZ + 1].copy()
    bz = q[mc.BZ] if grid.ndim == 2 else None
    b_in, report = curl_with_divergence(A, grid, bz=bz, step=step, time=time)
    b_new = b_star.copy()
    b_new[:b_in.shape[0]] = b_in
    q[mc.ENERGY] = energy_correct(q[mc.ENERGY], b_star, b_new, option)
    q[mc.BX:mc.BZ + 1] = b_new
    return mc.ConservedState(q, state.gamma), report


def coupled_rhs(grid: Grid, dt: float, beta: float, order_k: int, local_c: bool = False,
                lam=None, weno: str = mc.DEFAULT_WENO, flux_limiter: bool = True,
                stats: dict | None = None):
    """Right-hand side of the joint (state, potential) system for one step.

    Velocities for the potential come from the same stage state. With
    ``flux_limiter`` the MHD fluxes are limited for forward Euler steps of
    size ``dt``, which keeps every SSP stage positive.
    """

    def rhs(y):
        state, A = y
        vel = VelocitySnapshot.from_components(state.velocity())
        dq = mc.ConservedState(mc.mhd_rhs(state, grid, lam, weno, dt if flux_limiter else None,
                                          stats), state.gamma)
        dA = potential_rhs(A, vel, dt, grid, beta, order_k, local_c=local_c)
        return dq, dA

    return rhs


def _check_finite(state, A, step, stage):
    if not (np.all(np.isfinite(state.q)) and np.all(np.isfinite(A.a))):
        raise NumericalFailure("non-finite values", step, stage)


def ct_step(state: mc.ConservedState, A: PotentialField, dt: float, grid: Grid,
            config: CtConfig = CtConfig(), step: int = 0, time: float = 0.0):
    """Advance state and potential by ``dt``.

    Returns ``(state, potential, DivergenceReport, floor_activations)``.
    """
    _check_finite(state, A, step, 0)
    beta = config.beta_for(grid.ndim)
    counter = {"stage": 0, "floors": 0, "limited": 0}
    rhs = coupled_rhs(grid, dt, beta, config.order_k, config.local_c, weno=config.weno,
                      flux_limiter=config.flux_limiter, stats=counter)

    def post(y):
        s, a = y
        counter["stage"] += 1
        _check_finite(s, a, step, counter["stage"])
        if config.positivity:
            try:
                s, n = mc.apply_positivity(s, grid)
            except mc.PositivityError as exc:
                raise NumericalFailure(str(exc), step, counter["stage"]) from exc
            counter["floors"] += n
        if config.cadence == "stage" and counter["stage"] < config.rk_order:
            s, _ = replace_field(s, a, grid, config.energy_option, step, time)
        return s, a

    try:
        state_star, A_new = mc.ssp_rk_step((state, A), rhs, dt, config.rk_order, post=post)
    except mc.PositivityError as exc:
        raise NumericalFailure(str(exc), step, counter["stage"] + 1) from exc
    state_new, report = replace_field(state_star, A_new, grid, config.energy_option,
                                      step + 1, time + dt)
    if config.positivity:
        state_new, n = mc.apply_positivity(state_new, grid)
        counter["floors"] += n
    return state_new, A_new, report, counter["floors"]
