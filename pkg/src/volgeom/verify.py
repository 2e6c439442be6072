"""Isomorphism checks between labelings, and end-to-end correctness harnesses."""
from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .labeling import TopologicalLabelMap, extract_full

CellPair = Tuple[Tuple[int, int, int], Tuple[int, int, int]]


@dataclass
class IsomorphismReport:
    isomorphic: bool
    witness: Optional[CellPair] = None
    counts: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.isomorphic

    def summary(self) -> str:
        head = "isomorphic" if self.isomorphic else f"NOT isomorphic: {self.reason}"
        parts = [head]
        for order in sorted(self.counts):
            a, b = self.counts[order]
            parts.append(f"  {order}-components: {a} vs {b}")
        if self.witness is not None:
            parts.append(f"  witness cells: {self.witness[0]} {self.witness[1]}")
        return "\n".join(parts)


def _labels(tau) -> np.ndarray:
    return tau.labels if isinstance(tau, TopologicalLabelMap) else np.asarray(tau)


def _cell(flat: int, shape) -> Tuple[int, int, int]:
    return tuple(int(v) + 1 for v in np.unravel_index(int(flat), shape))


def check_isomorphic(tau, other, orders: Optional[Iterable[int]] = None) -> IsomorphismReport:
    """Check that two labelings agree up to a zero-preserving label bijection.

    Each cell order is compared in its own label namespace. The witness is a
    pair of 1-based cells (the same cell twice for a zero/non-zero mismatch).
    """
    a = _labels(tau)
    b = _labels(other)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    orders = sorted({0, 1, 2, 3} if orders is None else set(orders))
    mask_of = TopologicalLabelMap(a).order_mask
    counts: Dict[int, Tuple[int, int]] = {}
    failure: Optional[IsomorphismReport] = None
    for order in orders:
        m = mask_of(order)
        flat = np.flatnonzero(m)
        la = a.ravel()[flat].astype(np.int64)
        lb = b.ravel()[flat].astype(np.int64)
        counts[order] = (len(np.unique(la[la > 0])), len(np.unique(lb[lb > 0])))
        if failure is not None:
            continue
        zero_mismatch = np.flatnonzero((la == 0) != (lb == 0))
        if len(zero_mismatch):
            c = _cell(flat[zero_mismatch[0]], a.shape)
            failure = IsomorphismReport(False, (c, c), reason=f"{order}-cell active in only one labeling")
            continue
        nz = la > 0
        pairs, first = np.unique(np.stack([la[nz], lb[nz]], axis=1), axis=0, return_index=True)
        cells = flat[nz][first]
        for col, name in ((0, "first"), (1, "second")):
            keys = pairs[:, col]
            order_idx = np.argsort(keys, kind="stable")
            sk = keys[order_idx]
            dup = np.flatnonzero(sk[1:] == sk[:-1])
            if len(dup):
                u, v = order_idx[dup[0]], order_idx[dup[0] + 1]
                failure = IsomorphismReport(
                    False,
                    (_cell(cells[u], a.shape), _cell(cells[v], a.shape)),
                    reason=f"{order}-cells share a label in the {name} labeling only",
                )
                break
    if failure is not None:
        failure.counts = counts
        return failure
    return IsomorphismReport(True, None, counts)


def check_isomorphic_pairwise(tau, other) -> bool:
    """Quadratic reference form of the isomorphism conditions, for tiny grids only."""
    a = _labels(tau)
    b = _labels(other)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    orders = TopologicalLabelMap(a).order_mask
    for order in range(4):
        la = a[orders(order)].astype(np.int64)
        lb = b[orders(order)].astype(np.int64)
        if np.any((la == 0) != (lb == 0)):
            return False
        if not np.array_equal(la[:, None] == la[None, :], lb[:, None] == lb[None, :]):
            return False
    return True


def verify_pipeline(sigma, block_shape, curve_merging: bool = True, workers: int = 1) -> IsomorphismReport:
    """Compare block-wise extraction of ``sigma`` with whole-volume labeling."""
    from .blockwise import extract_blockwise

    oracle = extract_full(sigma)
    result = extract_blockwise(sigma, block_shape, workers=workers, curve_merging=curve_merging)
    return check_isomorphic(oracle.tau, result.label_map())


def check_store(grid_root, geometry_root, expected: TopologicalLabelMap) -> bool:
    """Exhaustively compare stored labels and coordinate lists with ``expected``."""
    from .store import ComponentNotFound, GeometryStore, GridStore

    grid = GridStore.open(grid_root)
    geometry = GeometryStore.open(geometry_root)
    labels = expected.labels
    mask_of = expected.order_mask
    try:
        for t in expected.shape.cells():
            _, label = grid.query_label(t)
            if label != labels[t[0] - 1, t[1] - 1, t[2] - 1]:
                return False
        for order in range(4):
            vals = labels[mask_of(order)]
            present = np.unique(vals[vals > 0])
            for q in present.tolist():
                want = np.argwhere(mask_of(order) & (labels == q)) + 1
                got = geometry.read_component(order, q)
                if len(got) != len(want):
                    return False
                got = got[np.lexsort(got.T[::-1])]
                if not np.array_equal(got, want):
                    return False
            if order < 3:
                if geometry.max_labels[order] != len(present):
                    return False
    except (ComponentNotFound, IndexError, ValueError, OSError):
        return False
    return True


def verify_store(sigma, block_shape, workdir=None, workers: int = 1) -> bool:
    """Build grid and geometry stores for ``sigma`` and check them cell by cell."""
    from .blockwise import extract_blockwise
    from .store import write_geometry

    expected = extract_blockwise(sigma, block_shape).label_map()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        grid = Path(tmp) / "grid"
        geom = Path(tmp) / "geometry"
        result = extract_blockwise(sigma, block_shape, workers=workers, store=grid)
        write_geometry(result.store, geom)
        return check_store(grid, geom, expected)
