"""Grids, flow vectors and mobility tableaus.

A mobility tableau is a sparse multiset of positioned OD vectors on an
``m x n`` grid.  Coordinates are 1-based throughout.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
    InvalidPermutationError,
    OutOfRangeError,
)


@dataclass(frozen=True)
class GridSpec:
    rows_m: int
    cols_n: int
    cell_width: float = 1.0

    def __post_init__(self):
        if int(self.rows_m) != self.rows_m or self.rows_m < 1:
            raise InvalidParameterError(f"rows_m must be a positive integer, got {self.rows_m!r}")
        if int(self.cols_n) != self.cols_n or self.cols_n < 1:
            raise InvalidParameterError(f"cols_n must be a positive integer, got {self.cols_n!r}")
        if not self.cell_width > 0:
            raise InvalidParameterError(f"cell_width must be positive, got {self.cell_width!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows_m, self.cols_n)

    @property
    def n_cells(self) -> int:
        return self.rows_m * self.cols_n

    @property
    def is_square(self) -> bool:
        return self.rows_m == self.cols_n

    def contains(self, x: int, y: int) -> bool:
        return 1 <= x <= self.rows_m and 1 <= y <= self.cols_n

    def cells(self) -> list[CellCoord]:
        """All cells in lexicographic order."""
        return [CellCoord(x, y) for x in range(1, self.rows_m + 1) for y in range(1, self.cols_n + 1)]

    def same_geometry(self, other: GridSpec) -> bool:
        return self.shape == other.shape and self.cell_width == other.cell_width


class CellCoord(NamedTuple):
    x: int
    y: int


class FlowVector(NamedTuple):
    """A positioned OD vector from cell ``(ox, oy)`` to cell ``(dx, dy)``."""

    ox: int
    oy: int
    dx: int
    dy: int

    @classmethod
    def between(cls, origin, dest) -> FlowVector:
        return cls(int(origin[0]), int(origin[1]), int(dest[0]), int(dest[1]))

    @property
    def origin(self) -> CellCoord:
        return CellCoord(self.ox, self.oy)

    @property
    def dest(self) -> CellCoord:
        return CellCoord(self.dx, self.dy)

    @property
    def is_self_loop(self) -> bool:
        return self.ox == self.dx and self.oy == self.dy


def _check_same_grid(a: GridSpec, b: GridSpec):
    if not a.same_geometry(b):
        raise DimensionMismatchError(f"grids differ: {a} vs {b}")


@dataclass(frozen=True)
class MobilityTableau:
    """Sparse map from :class:`FlowVector` to a strictly positive flow.

    Zero entries passed to the constructor are dropped; negative entries and
    vectors leaving the grid raise.
    """

    grid: GridSpec
    flows: Mapping[FlowVector, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for v, w in self.flows.items():
            v = FlowVector(*(int(c) for c in v))
            w = float(w)
            if not np.isfinite(w) or w < 0:
                raise InvalidParameterError(f"flow for {v} must be finite and non-negative, got {w}")
            if not (self.grid.contains(v.ox, v.oy) and self.grid.contains(v.dx, v.dy)):
                raise OutOfRangeError(f"{v} lies outside the {self.grid.rows_m}x{self.grid.cols_n} grid")
            if w > 0:
                clean[v] = clean.get(v, 0.0) + w
        object.__setattr__(self, "flows", MappingProxyType(dict(sorted(clean.items()))))

    @classmethod
    def from_records(cls, grid: GridSpec, records: Iterable) -> MobilityTableau:
        """Build from ``(ox, oy, dx, dy, flow)`` rows, summing duplicates."""
        acc: dict[FlowVector, float] = {}
        for ox, oy, dx, dy, w in records:
            v = FlowVector(int(ox), int(oy), int(dx), int(dy))
            acc[v] = acc.get(v, 0.0) + float(w)
        return cls(grid, acc)

    @classmethod
    def empty(cls, grid: GridSpec) -> MobilityTableau:
        return cls(grid, {})

    def __reduce__(self):
        # the read-only flow view does not pickle; rebuild from a plain dict
        return (type(self), (self.grid, dict(self.flows)))

    def __len__(self):
        return len(self.flows)

    def __iter__(self):
        return iter(self.flows.items())

    def __eq__(self, other):
        if not isinstance(other, MobilityTableau):
            return NotImplemented
        return self.grid == other.grid and dict(self.flows) == dict(other.flows)

    def __hash__(self):
        return hash((self.grid, tuple(self.flows.items())))

    @property
    def total_flow(self) -> float:
        return math.fsum(self.flows.values())

    def is_empty(self) -> bool:
        return not self.flows

    def get(self, v, default: float = 0.0) -> float:
        return self.flows.get(FlowVector(*v), default)

    def scaled(self, k: float) -> MobilityTableau:
        if not k >= 0:
            raise InvalidParameterError(f"scale factor must be non-negative, got {k}")
        return MobilityTableau(self.grid, {v: w * k for v, w in self.flows.items()})

    def with_flows(self, flows: Mapping[FlowVector, float]) -> MobilityTableau:
        return MobilityTableau(self.grid, flows)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(coords, weights)``; coords has shape ``(k, 4)`` in sorted vector order."""
        if not self.flows:
            return np.zeros((0, 4), dtype=np.int64), np.zeros(0)
        coords = np.array(list(self.flows.keys()), dtype=np.int64)
        weights = np.fromiter(self.flows.values(), dtype=float, count=len(self.flows))
        return coords, weights

    def dense(self) -> np.ndarray:
        """Dense ``(m*n, m*n)`` OD matrix with row-major cell indexing."""
        m, n = self.grid.shape
        out = np.zeros((m * n, m * n))
        for v, w in self.flows.items():
            out[(v.ox - 1) * n + v.oy - 1, (v.dx - 1) * n + v.dy - 1] += w
        return out

    def cell_outflow(self) -> np.ndarray:
        """Total flow leaving each cell, shaped like the grid."""
        out = np.zeros(self.grid.shape)
        for v, w in self.flows.items():
            out[v.ox - 1, v.oy - 1] += w
        return out


def manhattan_length(v: FlowVector) -> int:
    """Cost of adding or deleting ``v``: L1 distance between its endpoints."""
    return abs(v[2] - v[0]) + abs(v[3] - v[1])


def shift_cost(v: FlowVector, v2: FlowVector, grid: GridSpec | None = None,
               grid2: GridSpec | None = None) -> int:
    """Cost of moving ``v`` onto ``v2``: origin displacement plus destination displacement."""
    if grid is not None and grid2 is not None:
        _check_same_grid(grid, grid2)
    return abs(v2[0] - v[0]) + abs(v2[1] - v[1]) + abs(v2[2] - v[2]) + abs(v2[3] - v[3])


def total_mass_cost(S: MobilityTableau) -> float:
    """Cost of building ``S`` from nothing (equivalently, deleting all of it)."""
    if not S.flows:
        return 0.0
    coords, weights = S.arrays()
    lengths = np.abs(coords[:, 2] - coords[:, 0]) + np.abs(coords[:, 3] - coords[:, 1])
    return math.fsum(weights * lengths)


def reduce_common(X: MobilityTableau, Y: MobilityTableau) -> tuple[MobilityTableau, MobilityTableau]:
    """Remove the common part ``min(X, Y)`` from both tableaus.

    The least transformation cost is unchanged by this reduction.
    """
    _check_same_grid(X.grid, Y.grid)
    xr, yr = {}, {}
    for v, w in X.flows.items():
        rest = w - Y.flows.get(v, 0.0)
        if rest > 0:
            xr[v] = rest
    for v, w in Y.flows.items():
        rest = w - X.flows.get(v, 0.0)
        if rest > 0:
            yr[v] = rest
    return MobilityTableau(X.grid, xr), MobilityTableau(Y.grid, yr)


def normalize(S: MobilityTableau) -> MobilityTableau:
    """Rescale so the flows sum to one."""
    total = S.total_flow
    if not total > 0:
        raise DegenerateInputError("cannot normalize a tableau with zero total flow")
    return MobilityTableau(S.grid, {v: w / total for v, w in S.flows.items()})


def apply_permutation(S: MobilityTableau, perm: Mapping) -> MobilityTableau:
    """Relabel cells by ``perm`` (a mapping cell -> cell; unlisted cells stay put)."""
    grid = S.grid
    mapping = {CellCoord(*k): CellCoord(*v) for k, v in perm.items()}
    for c in list(mapping.keys()) + list(mapping.values()):
        if not grid.contains(*c):
            raise InvalidPermutationError(f"cell {tuple(c)} is outside the grid")
    if len(set(mapping.values())) != len(mapping) or set(mapping.values()) != set(mapping.keys()):
        raise InvalidPermutationError("mapping is not a bijection over grid cells")

    def f(x, y):
        return mapping.get((x, y), (x, y))

    out: dict[FlowVector, float] = {}
    for v, w in S.flows.items():
        nv = FlowVector(*f(v.ox, v.oy), *f(v.dx, v.dy))
        out[nv] = out.get(nv, 0.0) + w
    return MobilityTableau(grid, out)


def swap_permutation(swaps: Iterable[tuple]) -> dict[CellCoord, CellCoord]:
    """Compose a sequence of cell transpositions into one mapping (applied left to right)."""
    current: dict[CellCoord, CellCoord] = {}
    for a, b in swaps:
        a, b = CellCoord(*a), CellCoord(*b)
        # image of a cell under the composition so far
        inv = {v: k for k, v in current.items()}
        src_a, src_b = inv.get(a, a), inv.get(b, b)
        current[src_a], current[src_b] = b, a
    return {k: v for k, v in current.items() if k != v}


class Dihedral(enum.Enum):
    """The eight rotations/reflections of a rectangular (square for some) grid."""

    IDENTITY = "identity"
    ROT90 = "rot90"
    ROT180 = "rot180"
    ROT270 = "rot270"
    FLIP_X = "flip_x"
    FLIP_Y = "flip_y"
    FLIP_DIAG = "flip_diag"
    FLIP_ANTIDIAG = "flip_antidiag"

    @property
    def needs_square(self) -> bool:
        return self in (Dihedral.ROT90, Dihedral.ROT270, Dihedral.FLIP_DIAG, Dihedral.FLIP_ANTIDIAG)

    def map_cell(self, x: int, y: int, m: int, n: int) -> tuple[int, int]:
        if self is Dihedral.IDENTITY:
            return x, y
        if self is Dihedral.ROT90:
            return y, m + 1 - x
        if self is Dihedral.ROT180:
            return m + 1 - x, n + 1 - y
        if self is Dihedral.ROT270:
            return n + 1 - y, x
        if self is Dihedral.FLIP_X:
            return m + 1 - x, y
        if self is Dihedral.FLIP_Y:
            return x, n + 1 - y
        if self is Dihedral.FLIP_DIAG:
            return y, x
        return n + 1 - y, m + 1 - x

    def compose(self, other: Dihedral) -> Dihedral:
        """Element equal to applying ``other`` first, then ``self``."""
        return _COMPOSE[(self, other)]

    def inverse(self) -> Dihedral:
        return next(g for g in Dihedral if self.compose(g) is Dihedral.IDENTITY)


def _signature(fn, size=3):
    return tuple(fn(x, y) for x in range(1, size + 1) for y in range(1, size + 1))


_SIGNATURES = {_signature(lambda x, y, g=g: g.map_cell(x, y, 3, 3)): g for g in Dihedral}
_COMPOSE = {
    (a, b): _SIGNATURES[_signature(lambda x, y, a=a, b=b: a.map_cell(*b.map_cell(x, y, 3, 3), 3, 3))]
    for a in Dihedral
    for b in Dihedral
}


def dihedral_transform(S: MobilityTableau, g: Dihedral | str) -> MobilityTableau:
    g = Dihedral(g)
    m, n = S.grid.shape
    if g.needs_square and m != n:
        raise DimensionMismatchError(f"{g.value} requires a square grid, got {m}x{n}")
    out = {}
    for v, w in S.flows.items():
        nv = FlowVector(*g.map_cell(v.ox, v.oy, m, n), *g.map_cell(v.dx, v.dy, m, n))
        out[nv] = w
    return MobilityTableau(S.grid, out)


def extract_slice(S: MobilityTableau, top_left, size: int) -> MobilityTableau:
    """Flows with both endpoints inside the ``size x size`` window, in local coordinates."""
    x0, y0 = int(top_left[0]), int(top_left[1])
    if size < 1:
        raise InvalidParameterError(f"slice size must be positive, got {size}")
    m, n = S.grid.shape
    if x0 < 1 or y0 < 1 or x0 + size - 1 > m or y0 + size - 1 > n:
        raise OutOfRangeError(f"{size}x{size} window at ({x0},{y0}) does not fit a {m}x{n} grid")
    x1, y1 = x0 + size - 1, y0 + size - 1
    out = {}
    for v, w in S.flows.items():
        if x0 <= v.ox <= x1 and x0 <= v.dx <= x1 and y0 <= v.oy <= y1 and y0 <= v.dy <= y1:
            out[FlowVector(v.ox - x0 + 1, v.oy - y0 + 1, v.dx - x0 + 1, v.dy - y0 + 1)] = w
    return MobilityTableau(GridSpec(size, size, S.grid.cell_width), out)


def slice_origins(grid: GridSpec, size: int) -> list[CellCoord]:
    """Top-left corners of every stride-1 window of the given size."""
    m, n = grid.shape
    if size > m or size > n:
        raise DimensionMismatchError(f"slice size {size} exceeds the {m}x{n} grid")
    return [CellCoord(x, y) for x in range(1, m - size + 2) for y in range(1, n - size + 2)]


def embed(S: MobilityTableau, grid: GridSpec, offset=(0, 0)) -> MobilityTableau:
    """Place ``S`` into a larger grid, shifting every cell by ``offset``."""
    ox, oy = offset
    return MobilityTableau(
        grid, {FlowVector(v.ox + ox, v.oy + oy, v.dx + ox, v.dy + oy): w for v, w in S.flows.items()}
    )
