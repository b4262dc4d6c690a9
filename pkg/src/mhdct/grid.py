"""Uniform structured grids and ghost-node fills.

Nodes sit at ``x_i = a + i dx`` with ``dx = (b - a) / N``. Periodic axes
store the ``N`` unique nodes; open axes store all ``N + 1`` nodes so that
both end points carry data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PERIODIC = "periodic"
OUTFLOW = "outflow"
INFLOW = "inflow"
BOUNDARY_KINDS = (PERIODIC, OUTFLOW, INFLOW)


@dataclass(frozen=True)
class FaceBC:
    kind: str
    state: tuple | None = None  # fixed conserved state for inflow faces

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == INFLOW and self.state is None:
            raise ValueError("inflow faces need a state")


@dataclass(frozen=True)
class Grid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    cells: tuple[int, ...]
    bcs: tuple[tuple[FaceBC, FaceBC], ...] = field(default=None)

    def __post_init__(self):
        nd = len(self.cells)
        if not (len(self.lower) == len(self.upper) == nd) or nd not in (1, 2, 3):
            raise ValueError("lower/upper/cells must have the same length (1 to 3)")
        if any(n < 6 for n in self.cells):
            raise ValueError("each axis needs at least 6 cells")
        if self.bcs is None:
            per = FaceBC(PERIODIC)
            object.__setattr__(self, "bcs", tuple((per, per) for _ in range(nd)))
        for lo, hi in self.bcs:
            if (lo.kind == PERIODIC) != (hi.kind == PERIODIC):
                raise ValueError("periodic faces must come in pairs")

    @classmethod
    def uniform(cls, lower: Sequence[float], upper: Sequence[float], cells: Sequence[int],
                kinds: Sequence[str] | str = PERIODIC) -> "Grid":
        nd = len(cells)
        if isinstance(kinds, str):
            kinds = [kinds] * nd
        bcs = tuple((FaceBC(k), FaceBC(k)) for k in kinds)
        return cls(tuple(map(float, lower)), tuple(map(float, upper)), tuple(cells), bcs)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    def periodic(self, axis: int) -> bool:
        return self.bcs[axis][0].kind == PERIODIC

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n if self.periodic(ax) else n + 1 for ax, n in enumerate(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lower, self.upper, self.cells))

    def length(self, axis: int) -> float:
        return self.upper[axis] - self.lower[axis]

    def coords(self, axis: int) -> np.ndarray:
        return self.lower[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.coords(ax) for ax in range(self.ndim)), indexing="ij")

    @property
    def size(self) -> int:
        return math.prod(self.shape)


def _take(a: np.ndarray, axis: int, start: int, stop: int) -> np.ndarray:
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, stop)
    return a[tuple(sl)]


def _extrapolation_matrix(width: int, degree: int) -> np.ndarray:
    # ghost node -g (g = 1..width) from the interpolant through nodes 0..degree
    s = np.arange(degree + 1, dtype=np.float64)
    vander = s[None, :] ** np.arange(degree + 1)[:, None]
    inv = np.linalg.inv(vander.T)
    ghosts = -np.arange(width, 0, -1, dtype=np.float64)  # -width .. -1
    return (ghosts[:, None] ** np.arange(degree + 1)[None, :]) @ inv


def pad_axis(a: np.ndarray, axis: int, width: int, bc: tuple[FaceBC, FaceBC],
             degree: int = 0, component_axis: bool = True, inflow: bool = True) -> np.ndarray:
    """Add ``width`` ghost nodes on both ends of array axis ``axis``.

    Periodic faces wrap. Outflow faces extrapolate with a polynomial of
    ``degree`` through the nearest nodes (``0`` copies the end value).
    Inflow faces hold ``bc.state`` (indexed along axis 0 of ``a`` when
    ``component_axis`` is set). With ``inflow=False`` they are treated as
    outflow, which suits arrays other than the conserved state.
    """
    lo_bc, hi_bc = bc
    n = a.shape[axis]
    if lo_bc.kind == PERIODIC:
        if width > n:
            raise ValueError("ghost width exceeds the periodic length")
        return np.concatenate([_take(a, axis, n - width, n), a, _take(a, axis, 0, width)], axis=axis)

    def ghosts(face: FaceBC, edge: np.ndarray) -> np.ndarray:
        # edge holds the degree+1 nodes nearest the face, ordered from the face inward
        if face.kind == INFLOW and inflow:
            state = np.asarray(face.state, dtype=a.dtype)
            shape = [1] * a.ndim
            if component_axis:
                shape[0] = state.shape[0]
            g = np.broadcast_to(state.reshape(shape), _take(edge, axis, 0, 1).shape)
            return np.concatenate([g] * width, axis=axis)
        if degree == 0:
            return np.concatenate([_take(edge, axis, 0, 1)] * width, axis=axis)
        W = _extrapolation_matrix(width, degree)  # rows ordered farthest first
        moved = np.moveaxis(edge, axis, 0)
        shape = (W.shape[0],) + (1,) * (moved.ndim - 1)
        out = W[:, 0].reshape(shape) * moved[0]
        for j in range(1, W.shape[1]):  # node by node: independent of batching
            out = out + W[:, j].reshape(shape) * moved[j]
        return np.moveaxis(out, 0, axis)

    if n < degree + 1:
        raise ValueError("not enough nodes for the requested extrapolation")
    lo_edge = _take(a, axis, 0, degree + 1)
    hi_edge = np.flip(_take(a, axis, n - degree - 1, n), axis=axis)
    lo = ghosts(lo_bc, lo_edge)
    hi = np.flip(ghosts(hi_bc, hi_edge), axis=axis)
    return np.concatenate([lo, a, hi], axis=axis)


def pad_all(a: np.ndarray, grid: Grid, width: int, degree: int = 0,
            component_axis: bool = True, inflow: bool = True) -> np.ndarray:
    """Ghost-fill every spatial axis in turn (corners included)."""
    off = 1 if component_axis else 0
    for ax in range(grid.ndim):
        a = pad_axis(a, ax + off, width, grid.bcs[ax], degree, component_axis, inflow)
    return a


def strip(a: np.ndarray, width: int, ndim: int, component_axis: bool = True) -> np.ndarray:
    off = 1 if component_axis else 0
    sl = [slice(None)] * a.ndim
    for ax in range(ndim):
        sl[ax + off] = slice(width, a.shape[ax + off] - width)
    return a[tuple(sl)]
