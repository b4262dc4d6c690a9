"""Benchmark problems: initial state, initial potential, boundaries, run times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import mhd_core as mc
from .ct import curl
from .grid import INFLOW, OUTFLOW, PERIODIC, FaceBC, Grid
from .hj_potential import PotentialField

VORTEX_MU = 5.389489439
VORTEX_KAPPA = math.sqrt(2.0) * VORTEX_MU
VORTEX_BACKGROUND = (1.0, 1.0, 1.0, 0.0, 1.0)  # rho, u1, u2, u3, p
LOOP_RADIUS = 0.3
LOOP_AMPLITUDE = 1.0e-3
BLAST_B = 50.0 / math.sqrt(2.0 * math.pi)

CLOUD_LEFT = (3.86859, 11.2536, 0.0, 0.0, 167.345, 0.0, 2.1826182, -2.1826182)
CLOUD_RIGHT = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.56418958, 0.56418958)
CLOUD_INTERFACE = 0.05


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    default_cells: tuple[int, ...]
    t_final: float
    init_state: Callable[..., mc.ConservedState] = field(repr=False)
    init_potential: Callable[..., PotentialField] = field(repr=False)
    boundaries: Callable[[int], tuple] = field(repr=False)  # ndim -> per-axis face pairs
    energy_option: int = 1
    gamma: float = mc.GAMMA
    b_from_curl: bool = False
    flux_limiter: bool = False
    reference_cells: tuple[int, ...] | None = None

    @property
    def ndim(self) -> int:
        return len(self.lower)

    def make_grid(self, cells=None) -> Grid:
        cells = tuple(cells) if cells is not None else self.default_cells
        if len(cells) != self.ndim:
            raise ValueError(f"{self.name} is {self.ndim}D, got cells {cells}")
        return Grid(self.lower, self.upper, cells, self.boundaries(self.ndim))


def _periodic(ndim):
    return tuple((FaceBC(PERIODIC), FaceBC(PERIODIC)) for _ in range(ndim))


def _outflow(ndim):
    return tuple((FaceBC(OUTFLOW), FaceBC(OUTFLOW)) for _ in range(ndim))


def _primitive_state(rho, u, p, B, gamma=mc.GAMMA):
    return mc.ConservedState.from_primitive(rho, u, p, B, gamma)


# --------------------------------------------------------------------------
# smooth vortex


def _wrap(x, lo, hi):
    return lo + np.mod(x - lo, hi - lo)


def vortex_primitives(x, y, mu: float = VORTEX_MU, kappa: float = VORTEX_KAPPA):
    """Vortex primitives (rho, u, p, B) at the given points (centered at 0)."""
    r2 = x * x + y * y
    e = np.exp(0.5 * (1.0 - r2))
    rho0, u10, u20, u30, p0 = VORTEX_BACKGROUND
    du = kappa / (2 * math.pi) * e
    dB = mu / (2 * math.pi) * e
    dp = (mu ** 2 * (1.0 - r2) - kappa ** 2) / (8 * math.pi ** 2) * e * e
    zero = np.zeros_like(r2)
    rho = np.full_like(r2, rho0)
    u = (u10 - du * y, u20 + du * x, zero + u30)
    B = (-dB * y, dB * x, zero)
    return rho, u, p0 + dp, B


def vortex_exact(t: float, x, y, spec: "ProblemSpec | None" = None) -> mc.ConservedState:
    """Vortex translated by ``(t, t)`` with periodic wrapping."""
    lo, hi = (-10.0, 10.0) if spec is None else (spec.lower[0], spec.upper[0])
    xs = _wrap(np.asarray(x, dtype=np.float64) - t, lo, hi)
    ys = _wrap(np.asarray(y, dtype=np.float64) - t, lo, hi)
    return _primitive_state(*vortex_primitives(xs, ys))


def _vortex_state(grid: Grid, **_):
    x, y = grid.mesh()
    return vortex_exact(0.0, x, y)


def _vortex_potential(grid: Grid, **_):
    x, y = grid.mesh()
    return PotentialField(VORTEX_MU / (2 * math.pi) * np.exp(0.5 * (1.0 - x * x - y * y)))


# --------------------------------------------------------------------------
# Orszag-Tang


def _ot_state(grid: Grid, **_):
    x, y = grid.mesh()
    g = mc.GAMMA
    z = np.zeros_like(x)
    return _primitive_state(np.full_like(x, g * g), (-np.sin(y), np.sin(x), z), np.full_like(x, g),
                            (-np.sin(y), np.sin(2 * x), z))


def _ot_potential(grid: Grid, **_):
    x, y = grid.mesh()
    return PotentialField(0.5 * np.cos(2 * x) + np.cos(y))


# --------------------------------------------------------------------------
# cloud shock


def _cloud_boundaries(ndim):
    left = mc.ConservedState.from_primitive(
        np.array(CLOUD_LEFT[0]), CLOUD_LEFT[1:4], np.array(CLOUD_LEFT[4]), CLOUD_LEFT[5:8]).q
    return ((FaceBC(INFLOW, tuple(left.tolist())), FaceBC(OUTFLOW)),
            (FaceBC(OUTFLOW), FaceBC(OUTFLOW)))


def _cloud_state(grid: Grid, **_):
    x, y = grid.mesh()
    left = x < CLOUD_INTERFACE
    prim = [np.where(left, a, b) for a, b in zip(CLOUD_LEFT, CLOUD_RIGHT)]
    cloud = (x - 0.25) ** 2 + (y - 0.5) ** 2 <= 0.15 ** 2
    prim[0] = np.where(cloud, 10.0, prim[0])
    return _primitive_state(prim[0], prim[1:4], prim[4], prim[5:8])


def _cloud_potential(grid: Grid, **_):
    x, _ = grid.mesh()
    a = np.where(x <= CLOUD_INTERFACE, -CLOUD_LEFT[6] * (x - CLOUD_INTERFACE),
                 -CLOUD_RIGHT[6] * (x - CLOUD_INTERFACE))
    return PotentialField(a)


# --------------------------------------------------------------------------
# blast waves


def _blast_state(grid: Grid, **_):
    mesh = grid.mesh()
    r2 = sum(c * c for c in mesh)
    z = np.zeros_like(r2)
    p = np.where(r2 <= 0.1 ** 2, 1000.0, 0.1)
    return _primitive_state(np.ones_like(r2), (z, z, z), p, (z + BLAST_B, z + BLAST_B, z))


def _blast_potential(grid: Grid, **_):
    mesh = grid.mesh()
    a3 = BLAST_B * (mesh[1] - mesh[0])
    if grid.ndim == 2:
        return PotentialField(a3)
    z = np.zeros_like(a3)
    return PotentialField(np.stack([z, z, a3]))


# --------------------------------------------------------------------------
# field loops


def loop_potential(x, y, radius: float = LOOP_RADIUS, amplitude: float = LOOP_AMPLITUDE):
    r = np.sqrt(x * x + y * y)
    return np.where(r <= radius, amplitude * (radius - r), 0.0)


LOOP2D_VELOCITY = (2.0, 1.0, 0.0)  # sqrt(5) (cos t, sin t) with tan t = 1/2
LOOP3D_VELOCITY = (2.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0), 1.0 / math.sqrt(6.0))


def _loop_potential(grid: Grid, **_):
    mesh = grid.mesh()
    a3 = loop_potential(mesh[0], mesh[1])
    if grid.ndim == 2:
        return PotentialField(a3)
    z = np.zeros_like(a3)
    return PotentialField(np.stack([z, z, a3]))


def _loop_state(grid: Grid, velocity=None, **_):
    vel = velocity or (LOOP2D_VELOCITY if grid.ndim == 2 else LOOP3D_VELOCITY)
    shape = grid.shape
    one = np.ones(shape)
    A = _loop_potential(grid)
    B = np.zeros((3,) + shape)
    b = curl(A, grid)
    B[:b.shape[0]] = b
    return _primitive_state(one, tuple(v * one for v in vel), one, tuple(B))


# --------------------------------------------------------------------------
# registry

PROBLEMS: dict[str, ProblemSpec] = {
    "SmoothVortex": ProblemSpec("SmoothVortex", (-10.0, -10.0), (10.0, 10.0), (80, 80), 0.05,
                                _vortex_state, _vortex_potential, _periodic),
    "OrszagTang": ProblemSpec("OrszagTang", (0.0, 0.0), (2 * math.pi, 2 * math.pi), (192, 192), 3.0,
                              _ot_state, _ot_potential, _periodic),
    "CloudShock": ProblemSpec("CloudShock", (0.0, 0.0), (1.0, 1.0), (256, 256), 0.06,
                              _cloud_state, _cloud_potential, _cloud_boundaries,
                              flux_limiter=True, reference_cells=(512, 512)),
    "Blast2D": ProblemSpec("Blast2D", (-0.5, -0.5), (0.5, 0.5), (128, 128), 0.01,
                           _blast_state, _blast_potential, _outflow, energy_option=2,
                           flux_limiter=True, reference_cells=(256, 256)),
    "FieldLoop2D": ProblemSpec("FieldLoop2D", (-0.5, -0.5), (0.5, 0.5), (128, 128), 1.0,
                               _loop_state, _loop_potential, _periodic, b_from_curl=True),
    "FieldLoop3D": ProblemSpec("FieldLoop3D", (-0.5,) * 3, (0.5,) * 3, (32, 32, 32), 1.0,
                               _loop_state, _loop_potential, _periodic, b_from_curl=True,
                               reference_cells=(128, 128, 128)),
    "Blast3D": ProblemSpec("Blast3D", (-0.5,) * 3, (0.5,) * 3, (64, 64, 64), 0.01,
                           _blast_state, _blast_potential, _outflow, energy_option=2,
                           flux_limiter=True, reference_cells=(150, 150, 150)),
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def initialize(name: str, cells=None, reference_resolution: bool = False, **options):
    """Build ``(state, potential, grid, spec)`` for a registered problem.

    ``options`` are forwarded to the initializers (``velocity`` for the
    field loops).
    """
    spec = get_problem(name)
    if cells is None and reference_resolution and spec.reference_cells:
        cells = spec.reference_cells
    grid = spec.make_grid(cells)
    state = spec.init_state(grid, **options)
    A = spec.init_potential(grid, **options)
    return state, A, grid, spec
