"""Whole-volume labeling of segments, faces, curves and junction points.

``extract_full`` copies segment labels onto the 3-cells of the topological
grid, then labels connected components of 2-cells, 1-cells and finally active
0-cells. Every lower-order component records the sorted set of higher-order
components it bounds (its signature) in a ``NeighborhoodTable``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from . import _kernels
from .topogrid import CellCoord, GridBoundsError, GridShape, cell_order, gamma

LABEL_DTYPE = np.uint32


class LabelOverflowError(OverflowError):
    """More components than fit in the 32-bit label space."""


def as_segmentation(sigma) -> np.ndarray:
    """Validate a segment label map and return it as a C-ordered uint32 array."""
    a = np.asarray(sigma)
    if a.ndim != 3:
        raise ValueError(f"segment label map must be 3D, got shape {a.shape}")
    if a.size == 0:
        raise ValueError("segment label map is empty")
    if a.dtype.kind not in "ui":
        raise TypeError(f"segment labels must be integers, got {a.dtype}")
    if a.dtype != LABEL_DTYPE:
        if a.min() < 0 or a.max() > np.iinfo(LABEL_DTYPE).max:
            raise ValueError("segment labels must fit in unsigned 32 bits")
        a = a.astype(LABEL_DTYPE)
    if not a.all():
        raise ValueError("segment label 0 is reserved; every voxel needs a label >= 1")
    return np.ascontiguousarray(a)


@dataclass
class TopologicalLabelMap:
    """Labels on the topological grid; one label namespace per cell order.

    ``labels`` is the dense array; index it with 0-based positions, or index
    the map itself with 1-based cell coordinates.
    """

    labels: np.ndarray

    @property
    def shape(self) -> GridShape:
        m = self.labels.shape
        return GridShape((m[0] + 1) // 2, (m[1] + 1) // 2, (m[2] + 1) // 2)

    def __getitem__(self, t) -> int:
        t = tuple(int(x) for x in t)
        if not self.shape.contains_cell(t):
            raise GridBoundsError(f"cell {t} outside topological grid {self.labels.shape}")
        return int(self.labels[t[0] - 1, t[1] - 1, t[2] - 1])

    def order_mask(self, order: int) -> np.ndarray:
        """Boolean mask over ``labels`` selecting cells of the given order."""
        m = self.labels.shape
        odd = [np.arange(n) % 2 == 0 for n in m]  # 0-based even index = odd coordinate
        counts = (
            odd[0][:, None, None].astype(np.int8)
            + odd[1][None, :, None].astype(np.int8)
            + odd[2][None, None, :].astype(np.int8)
        )
        return counts == order

    def cells_with_label(self, order: int, label: int) -> list[CellCoord]:
        hits = np.argwhere(self.order_mask(order) & (self.labels == label)) + 1
        return [tuple(int(v) for v in row) for row in hits]


@dataclass
class NeighborhoodTable:
    """Row ``q-1`` lists the (order+1)-components bounded by component ``q``."""

    order: int
    rows: np.ndarray

    def __post_init__(self):
        width = 6 - 2 * self.order
        self.rows = np.asarray(self.rows, dtype=LABEL_DTYPE).reshape(-1, width)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def bounded(self, q: int) -> list[int]:
        if not 1 <= q <= len(self):
            raise KeyError(f"no {self.order}-component with label {q}")
        row = self.rows[q - 1]
        return [int(v) for v in row[row != 0]]


@dataclass
class Labeling:
    """Result of labeling one volume (the whole volume or one block)."""

    tau: TopologicalLabelMap
    max_segment_label: int
    neighborhoods: Dict[int, NeighborhoodTable]
    # rows (0-cell label or 0, six raw 1-cell labels) for 0-cells where curves meet
    junctions: np.ndarray = field(repr=False)

    @property
    def counts(self) -> Dict[int, int]:
        """Number of components per cell order 0, 1, 2."""
        return {c: len(self.neighborhoods[c]) for c in (0, 1, 2)}


def once(x: Sequence[int]) -> tuple[int, ...]:
    """Positive values occurring exactly once in ``x``, ascending, zero-padded."""
    if len(x) not in (2, 4, 6):
        raise ValueError(f"once expects 2, 4 or 6 values, got {len(x)}")
    counts = Counter(int(v) for v in x)
    kept = sorted(v for v, n in counts.items() if v > 0 and n == 1)
    return tuple(kept) + (0,) * (len(x) - len(kept))


def label_3cells(sigma) -> tuple[TopologicalLabelMap, int]:
    """Copy voxel labels onto the 3-cells; every other cell gets 0."""
    sigma = as_segmentation(sigma)
    shape = GridShape.of(sigma.shape)
    labels = np.zeros(shape.topological, dtype=LABEL_DTYPE)
    labels[::2, ::2, ::2] = sigma
    return TopologicalLabelMap(labels), int(sigma.max())


def signature(t, tau: TopologicalLabelMap) -> tuple[int, ...]:
    """``once`` of the current labels of the Gamma-neighbors of ``t``."""
    shape = tau.shape
    if cell_order(t, shape) == 3:
        raise ValueError("3-cells have no signature")
    return once([tau[u] for u in gamma(t, shape)])


def label_components(tau: TopologicalLabelMap, c: int) -> tuple[int, NeighborhoodTable]:
    """Label ``c``-components in place (``c`` in {1, 2}).

    The (c+1)-cells must already carry their final labels.
    """
    if c not in (1, 2):
        raise ValueError(f"cell order must be 1 or 2, got {c}")
    n, alpha = _kernels.label_components(tau.labels, c)
    if n < 0:
        raise LabelOverflowError(
            f"more than {2**32 - 1} {c}-components; labels need more than 32 bits"
        )
    return int(n), NeighborhoodTable(c, alpha)


def _label_0cells(tau: TopologicalLabelMap) -> tuple[int, NeighborhoodTable, np.ndarray]:
    n, alpha, junctions = _kernels.label_zero_cells(tau.labels)
    return int(n), NeighborhoodTable(0, alpha), junctions


def label_0cells(tau: TopologicalLabelMap) -> tuple[int, NeighborhoodTable]:
    """Give each active 0-cell its own label, in place."""
    n, table, _ = _label_0cells(tau)
    return n, table


def extract_full(sigma) -> Labeling:
    """Label all cell orders of one volume held in memory."""
    tau, max_label = label_3cells(sigma)
    _, n2 = label_components(tau, 2)
    _, n1 = label_components(tau, 1)
    _, n0, junctions = _label_0cells(tau)
    return Labeling(tau, max_label, {2: n2, 1: n1, 0: n0}, junctions)


def disconnected_segments(sigma) -> list[int]:
    """Segment labels whose voxels do not form one 6-connected set.

    Extraction trusts its input, so this is an optional diagnostic.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    sigma = as_segmentation(sigma)
    index = np.arange(sigma.size).reshape(sigma.shape)
    rows, cols = [], []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        same = sigma[tuple(lo)] == sigma[tuple(hi)]
        rows.append(index[tuple(lo)][same])
        cols.append(index[tuple(hi)][same])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(sigma.size,) * 2)
    _, comp = connected_components(graph, directed=False)
    flat = sigma.ravel()
    pieces = np.unique(np.stack([flat, comp]), axis=1)
    labels, n_pieces = np.unique(pieces[0], return_counts=True)
    return [int(v) for v in labels[n_pieces > 1]]
