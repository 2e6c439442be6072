"""Voxel grid, topological grid, cell orders and the two cell relations.

All coordinates exposed here are 1-based. A volume of ``n1 x n2 x n3`` voxels
has a topological grid of ``(2*n1-1) x (2*n2-1) x (2*n3-1)`` cells; a cell
with ``j`` odd coordinates is a ``j``-cell (3-cells are voxels, 2-cells the
faces between them, 1-cells edges, 0-cells corners).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

CellCoord = Tuple[int, int, int]


class GridBoundsError(IndexError):
    """A coordinate lies outside the voxel or topological grid."""


@dataclass(frozen=True)
class GridShape:
    n1: int
    n2: int
    n3: int

    def __post_init__(self):
        for n in (self.n1, self.n2, self.n3):
            if int(n) != n or n < 1:
                raise ValueError(f"grid extents must be positive integers, got {self.voxels}")

    @classmethod
    def of(cls, shape) -> "GridShape":
        if isinstance(shape, GridShape):
            return shape
        n1, n2, n3 = (int(n) for n in shape)
        return cls(n1, n2, n3)

    @property
    def voxels(self) -> Tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def topological(self) -> Tuple[int, int, int]:
        return (2 * self.n1 - 1, 2 * self.n2 - 1, 2 * self.n3 - 1)

    def contains_voxel(self, r) -> bool:
        return all(1 <= int(x) <= n for x, n in zip(r, self.voxels))

    def contains_cell(self, t) -> bool:
        return all(1 <= int(x) <= n for x, n in zip(t, self.topological))

    def cells(self) -> Iterator[CellCoord]:
        """All cells in lexicographic order."""
        m1, m2, m3 = self.topological
        for t1 in range(1, m1 + 1):
            for t2 in range(1, m2 + 1):
                for t3 in range(1, m3 + 1):
                    yield (t1, t2, t3)


def _check_cell(t, shape: GridShape | None) -> CellCoord:
    if len(t) != 3:
        raise ValueError(f"expected a 3D coordinate, got {t!r}")
    t = (int(t[0]), int(t[1]), int(t[2]))
    if shape is not None and not shape.contains_cell(t):
        raise GridBoundsError(f"cell {t} outside topological grid {shape.topological}")
    if shape is None and min(t) < 1:
        raise GridBoundsError(f"cell {t} has a non-positive coordinate")
    return t


def cell_order(t, shape: GridShape | None = None) -> int:
    """Number of odd coordinates of ``t``."""
    t = _check_cell(t, shape)
    return sum(x & 1 for x in t)


def voxel_to_cell(r, shape: GridShape | None = None) -> CellCoord:
    """Map voxel ``r`` to its 3-cell ``2r - 1``."""
    if len(r) != 3:
        raise ValueError(f"expected a 3D coordinate, got {r!r}")
    r = (int(r[0]), int(r[1]), int(r[2]))
    if shape is not None and not shape.contains_voxel(r):
        raise GridBoundsError(f"voxel {r} outside voxel grid {shape.voxels}")
    if min(r) < 1:
        raise GridBoundsError(f"voxel {r} has a non-positive coordinate")
    return (2 * r[0] - 1, 2 * r[1] - 1, 2 * r[2] - 1)


def gamma(t, shape: GridShape) -> list[CellCoord]:
    """Gamma-neighbors of ``t``: the cells one step along each even axis.

    Ordered axis 1 (-, +), axis 2 (-, +), axis 3 (-, +), skipping odd axes.
    Every returned cell has order ``cell_order(t) + 1``; 3-cells have none.
    """
    t = _check_cell(t, shape)
    out = []
    for axis in range(3):
        if t[axis] & 1:
            continue
        for step in (-1, 1):
            u = list(t)
            u[axis] += step
            out.append(tuple(u))
    return out


def gamma_inverse(t, shape: GridShape) -> list[CellCoord]:
    """Cells whose Gamma-neighborhood contains ``t`` (one step along odd axes)."""
    t = _check_cell(t, shape)
    m = shape.topological
    out = []
    for axis in range(3):
        if not t[axis] & 1:
            continue
        for step in (-1, 1):
            x = t[axis] + step
            if 1 <= x <= m[axis]:
                u = list(t)
                u[axis] = x
                out.append(tuple(u))
    return out


def connected(u, v, shape: GridShape) -> bool:
    """True iff ``u`` and ``v`` are distinct Gamma-neighbors of a common cell."""
    u = _check_cell(u, shape)
    v = _check_cell(v, shape)
    if u == v:
        return False
    return any(v in gamma(t, shape) for t in gamma_inverse(u, shape))


def connected_neighbors(u, shape: GridShape) -> list[CellCoord]:
    """All cells ``v`` with ``connected(u, v)``, deduplicated, in discovery order."""
    u = _check_cell(u, shape)
    seen = {}
    for t in gamma_inverse(u, shape):
        for v in gamma(t, shape):
            if v != u:
                seen.setdefault(v, None)
    return list(seen)
