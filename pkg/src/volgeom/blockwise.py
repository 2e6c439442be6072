"""Block-wise extraction with bounded memory.

The volume is cut into blocks that share one voxel layer with each neighbor.
Each block is labeled on its own, block-local labels are shifted by per-order
offsets, labels of cells seen by two blocks are unioned, and finally curves
that were split at junction points are merged and the activity of those
junction points re-evaluated.
"""
from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arrayfile import read_array
from .labeling import (
    LABEL_DTYPE,
    Labeling,
    LabelOverflowError,
    NeighborhoodTable,
    TopologicalLabelMap,
    as_segmentation,
    extract_full,
)
from .topogrid import GridBoundsError, GridShape
from .unionfind import DisjointSet

log = logging.getLogger(__name__)

ORDERS = (0, 1, 2)


class ConsistencyError(RuntimeError):
    """Two blocks disagree about a cell they share."""


class BlockProcessingError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"block {index} failed: {cause!r}")
        self.index = index


@dataclass(frozen=True)
class BlockSpec:
    block_shape: Tuple[int, int, int]
    volume_shape: GridShape

    def __post_init__(self):
        vs = GridShape.of(self.volume_shape)
        bs = tuple(int(b) for b in self.block_shape)
        if len(bs) != 3:
            raise ValueError(f"block shape must have 3 extents, got {self.block_shape!r}")
        for b, n in zip(bs, vs.voxels):
            if b < 1:
                raise ValueError(f"block extents must be positive, got {bs}")
            if b == 1 and n > 1:
                raise ValueError(
                    f"block extent 1 needs a volume extent of 1 (got {n}); "
                    "adjacent blocks must share a voxel layer"
                )
        object.__setattr__(self, "volume_shape", vs)
        object.__setattr__(self, "block_shape", bs)


@dataclass(frozen=True)
class Block:
    """One voxel sub-range. ``start`` is inclusive, ``stop`` exclusive, both 0-based."""

    index: int
    grid_index: Tuple[int, int, int]
    start: Tuple[int, int, int]
    stop: Tuple[int, int, int]

    @property
    def voxel_range(self) -> Tuple[Tuple[int, int], ...]:
        """Inclusive 1-based voxel range per axis."""
        return tuple((s + 1, e) for s, e in zip(self.start, self.stop))

    @property
    def voxel_slices(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(s, e) for s, e in zip(self.start, self.stop))

    @property
    def topological_origin(self) -> Tuple[int, int, int]:
        """0-based index of the block's first cell in the global topological grid."""
        return tuple(2 * s for s in self.start)

    @property
    def topological_shape(self) -> Tuple[int, int, int]:
        return tuple(2 * (e - s) - 1 for s, e in zip(self.start, self.stop))

    @property
    def topological_slices(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(2 * s, 2 * e - 1) for s, e in zip(self.start, self.stop))


def axis_ranges(n: int, b: int) -> List[Tuple[int, int]]:
    """0-based ``[start, stop)`` ranges along one axis with one shared layer."""
    if b >= n:
        return [(0, n)]
    out = []
    start = 0
    while True:
        stop = min(start + b, n)
        out.append((start, stop))
        if stop == n:
            return out
        start = stop - 1


def decompose(spec: BlockSpec) -> List[Block]:
    """Blocks in lexicographic order of their starting corner."""
    per_axis = [axis_ranges(n, b) for n, b in zip(spec.volume_shape.voxels, spec.block_shape)]
    blocks = []
    for gi in itertools.product(*(range(len(r)) for r in per_axis)):
        ranges = [per_axis[a][gi[a]] for a in range(3)]
        blocks.append(
            Block(
                index=len(blocks),
                grid_index=tuple(gi),
                start=tuple(r[0] for r in ranges),
                stop=tuple(r[1] for r in ranges),
            )
        )
    return blocks


def block_grid_shape(spec: BlockSpec) -> Tuple[int, int, int]:
    return tuple(len(axis_ranges(n, b)) for n, b in zip(spec.volume_shape.voxels, spec.block_shape))


def owning_block_index(spec: BlockSpec, t) -> int:
    """Index of the first block (in block order) containing 1-based cell ``t``."""
    if not spec.volume_shape.contains_cell(t):
        raise GridBoundsError(f"cell {tuple(t)} outside {spec.volume_shape.topological}")
    grid = block_grid_shape(spec)
    gi = []
    for x, b, nb in zip(t, spec.block_shape, grid):
        i = int(x) - 1
        if nb == 1:
            gi.append(0)
            continue
        # block k covers 0-based indices [2k(b-1), 2(k+1)(b-1)]
        k = max(0, -(-i // (2 * (b - 1))) - 1)
        gi.append(min(k, nb - 1))
    return (gi[0] * grid[1] + gi[1]) * grid[2] + gi[2]


@dataclass
class BlockResult:
    index: int
    local_tau: np.ndarray
    # component counts for orders 0, 1, 2, then the largest segment label
    max_labels: Tuple[int, int, int, int]
    neighborhoods: Dict[int, NeighborhoodTable]
    junctions: np.ndarray
    segments: Optional[np.ndarray] = None  # distinct segment labels, kept in memory only


@dataclass
class OffsetTable:
    offsets: np.ndarray  # (blocks, 3) for orders 0, 1, 2
    totals: Tuple[int, int, int]

    def __getitem__(self, key):
        block, order = key
        return int(self.offsets[block, order])


@dataclass
class GlobalTables:
    """Mappings from offset labels ``1..M_c`` to compact global labels ``1..K_c``.

    Index 0 of every mapping maps to 0.
    """

    relabel: Dict[int, np.ndarray]
    neighborhoods: Dict[int, NeighborhoodTable]
    max_labels: Tuple[int, int, int]  # K0, K1, K2

    @property
    def zero_cell_labels(self) -> np.ndarray:
        return self.relabel[0]


def process_block(sigma, block: Block) -> BlockResult:
    sub = as_segmentation(np.asarray(sigma[block.voxel_slices]))
    lab: Labeling = extract_full(sub)
    return BlockResult(
        index=block.index,
        local_tau=lab.tau.labels,
        max_labels=tuple(lab.counts[c] for c in ORDERS) + (lab.max_segment_label,),
        neighborhoods=lab.neighborhoods,
        junctions=lab.junctions,
        segments=np.unique(sub),
    )


def compute_offsets(results: Sequence[BlockResult]) -> OffsetTable:
    counts = np.array([r.max_labels[:3] for r in results], dtype=np.int64).reshape(-1, 3)
    offsets = np.zeros_like(counts)
    if len(counts):
        offsets[1:] = np.cumsum(counts, axis=0)[:-1]
    totals = tuple(int(v) for v in counts.sum(axis=0))
    limit = 2**32 - 1
    for c, m in zip(ORDERS, totals):
        if m > limit:
            bits = int(m).bit_length()
            raise LabelOverflowError(
                f"{m} {c}-cell labels across blocks exceed 32 bits; {bits}-bit labels required"
            )
    return OffsetTable(offsets, totals)


def _slab_orders(shape2d) -> np.ndarray:
    """Cell orders on a 2D slab cut at an odd coordinate (a shared voxel layer)."""
    odd0 = (np.arange(shape2d[0]) % 2 == 0).astype(np.int8)
    odd1 = (np.arange(shape2d[1]) % 2 == 0).astype(np.int8)
    return 1 + odd0[:, None] + odd1[None, :]


def adjacent_pairs(blocks: Sequence[Block]):
    """Face-adjacent block pairs ``(lower, upper, axis)``."""
    by_grid = {b.grid_index: b for b in blocks}
    for b in blocks:
        for axis in range(3):
            gi = list(b.grid_index)
            gi[axis] += 1
            other = by_grid.get(tuple(gi))
            if other is not None:
                yield b, other, axis


def reconcile(blocks: Sequence[Block], results: Sequence[BlockResult], offsets: OffsetTable):
    """Union the labels of 1- and 2-cells that two adjacent blocks both see.

    Returns ``(forest_1, forest_2)``.
    """
    forests = {1: DisjointSet(offsets.totals[1]), 2: DisjointSet(offsets.totals[2])}
    for lower, upper, axis in adjacent_pairs(blocks):
        a = np.take(results[lower.index].local_tau, -1, axis=axis)
        b = np.take(results[upper.index].local_tau, 0, axis=axis)
        a = np.asarray(a)
        b = np.asarray(b)
        orders = _slab_orders(a.shape)
        for c in (1, 2):
            mask = orders == c
            la = a[mask].astype(np.int64)
            lb = b[mask].astype(np.int64)
            bad = (la != 0) != (lb != 0)
            if bad.any():
                raise ConsistencyError(
                    f"blocks {lower.index} and {upper.index} disagree on the activity of "
                    f"{int(bad.sum())} {c}-cells"
                )
            active = la != 0
            pairs = np.stack(
                [la[active] + offsets[lower.index, c], lb[active] + offsets[upper.index, c]], axis=1
            )
            if len(pairs):
                pairs = np.unique(pairs, axis=0)
                forests[c].union_pairs(pairs[pairs[:, 0] != pairs[:, 1]])
    return forests[1], forests[2]


def once_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise ``once``: positive entries occurring exactly once, ascending, zero-padded."""
    rows = np.asarray(rows, dtype=np.int64)
    counts = (rows[:, :, None] == rows[:, None, :]).sum(axis=2)
    keep = (rows > 0) & (counts == 1)
    return _compact_rows(np.where(keep, rows, 0))


def unique_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise sorted distinct positive entries, zero-padded."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return rows
    big = np.iinfo(np.int64).max
    s = np.sort(np.where(rows > 0, rows, big), axis=1)
    dup = np.zeros_like(s, dtype=bool)
    dup[:, 1:] = s[:, 1:] == s[:, :-1]
    return _compact_rows(np.where(dup | (s == big), 0, s))


def _compact_rows(rows: np.ndarray) -> np.ndarray:
    big = np.iinfo(np.int64).max
    s = np.sort(np.where(rows > 0, rows, big), axis=1)
    return np.where(s == big, 0, s)


def _concat_tables(results, order: int) -> np.ndarray:
    width = 6 - 2 * order
    parts = [r.neighborhoods[order].rows for r in results]
    if not parts:
        return np.zeros((0, width), dtype=np.int64)
    return np.concatenate(parts).astype(np.int64).reshape(-1, width)


def _offset_table(results, offsets: OffsetTable, order: int, source_order: int) -> np.ndarray:
    """Concatenate per-block ``order`` tables, shifting entries by ``source_order`` offsets."""
    out = []
    for r in results:
        rows = r.neighborhoods[order].rows.astype(np.int64)
        out.append(np.where(rows > 0, rows + offsets[r.index, source_order], 0))
    width = 6 - 2 * order
    return np.concatenate(out).reshape(-1, width) if out else np.zeros((0, width), np.int64)


def _junction_rows(results, offsets: OffsetTable) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked junction rows as (offset 0-label or 0, offset 1-labels)."""
    zero, ones = [], []
    for r in results:
        j = r.junctions.astype(np.int64).reshape(-1, 7)
        zero.append(np.where(j[:, 0] > 0, j[:, 0] + offsets[r.index, 0], 0))
        ones.append(np.where(j[:, 1:] > 0, j[:, 1:] + offsets[r.index, 1], 0))
    if not zero:
        return np.zeros(0, np.int64), np.zeros((0, 6), np.int64)
    return np.concatenate(zero), np.concatenate(ones)


def _curve_face_sets(results, offsets: OffsetTable, forest_2: DisjointSet) -> np.ndarray:
    """Id of the global face set bounded by each offset 1-label (index 0 unused)."""
    rows = _offset_table(results, offsets, 1, 2)
    roots2 = forest_2.roots()
    mapped = unique_rows(np.where(rows > 0, roots2[rows], 0))
    ids = np.zeros(len(rows) + 1, dtype=np.int64)
    if len(rows):
        _, inverse = np.unique(mapped, axis=0, return_inverse=True)
        ids[1:] = inverse.reshape(-1) + 1
    return ids


def merge_curves(
    results: Sequence[BlockResult],
    offsets: OffsetTable,
    forest_1: DisjointSet,
    forest_2: DisjointSet,
) -> np.ndarray:
    """Merge curves meeting at a 0-cell that bound the same faces; recompute activity.

    Updates ``forest_1`` in place and returns a boolean array over offset
    0-labels ``0..M0`` telling which 0-cells stay active.
    """
    face_set = _curve_face_sets(results, offsets, forest_2)
    zero, ones = _junction_rows(results, offsets)
    sweeps = 0
    while True:
        sweeps += 1
        roots = forest_1.roots()
        r = np.where(ones > 0, roots[ones], 0)
        pairs = []
        for a, b in itertools.combinations(range(6), 2):
            la, lb = ones[:, a], ones[:, b]
            m = (la > 0) & (lb > 0) & (r[:, a] != r[:, b]) & (face_set[la] == face_set[lb])
            if m.any():
                pairs.append(np.stack([la[m], lb[m]], axis=1))
        merged = 0
        if pairs:
            merged = forest_1.union_pairs(np.unique(np.concatenate(pairs), axis=0))
        if not merged:
            break
    log.debug("curve merging converged after %d sweeps", sweeps)
    active = np.zeros(offsets.totals[0] + 1, dtype=bool)
    r = np.where(ones > 0, forest_1.roots()[ones], 0)
    still = once_rows(r)[:, 0] > 0 if len(r) else np.zeros(0, bool)
    has_label = zero > 0
    active[zero[has_label]] = still[has_label]
    return active


def local_activity(offsets: OffsetTable) -> np.ndarray:
    """0-cell activity as decided inside each block, without curve merging."""
    active = np.ones(offsets.totals[0] + 1, dtype=bool)
    active[0] = False
    return active


def _compact(roots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Map roots of labels ``1..M`` to ``1..K`` by first appearance.

    Returns ``(relabel over 0..M, first member of each compact label)``.
    """
    relabel = np.zeros(len(roots), dtype=np.int64)
    if len(roots) <= 1:
        return relabel, np.zeros(0, np.int64)
    uniq, first, inverse = np.unique(roots[1:], return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    relabel[1:] = rank[inverse.reshape(-1)] + 1
    return relabel, first[order] + 1


def finalize(
    results: Sequence[BlockResult],
    offsets: OffsetTable,
    forest_1: DisjointSet,
    forest_2: DisjointSet,
    active_0: np.ndarray,
) -> GlobalTables:
    relabel2, first2 = _compact(forest_2.roots())
    relabel1, first1 = _compact(forest_1.roots())
    relabel0 = np.zeros(offsets.totals[0] + 1, dtype=np.int64)
    relabel0[active_0] = np.arange(1, int(active_0.sum()) + 1)

    faces = _concat_tables(results, 2)
    nb2 = faces[first2 - 1] if len(first2) else np.zeros((0, 2), np.int64)

    curves = _offset_table(results, offsets, 1, 2)
    curves = unique_rows(relabel2[curves])
    nb1 = curves[first1 - 1] if len(first1) else np.zeros((0, 4), np.int64)

    zero, ones = _junction_rows(results, offsets)
    keep = (zero > 0) & active_0[zero]
    rows = once_rows(relabel1[ones[keep]]) if keep.any() else np.zeros((0, 6), np.int64)
    nb0 = np.zeros((int(active_0.sum()), 6), dtype=np.int64)
    nb0[relabel0[zero[keep]] - 1] = rows

    return GlobalTables(
        relabel={0: relabel0, 1: relabel1, 2: relabel2},
        neighborhoods={
            0: NeighborhoodTable(0, nb0),
            1: NeighborhoodTable(1, nb1),
            2: NeighborhoodTable(2, nb2),
        },
        max_labels=(len(nb0), len(nb1), len(nb2)),
    )


def default_workers() -> int:
    env = os.environ.get("VOLGEOM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def globalize(local, offsets_row, relabel: Dict[int, np.ndarray]) -> np.ndarray:
    """Translate block-local labels to global labels given the block's offsets."""
    local = np.asarray(local).astype(np.int64)
    out = np.zeros(local.shape, dtype=LABEL_DTYPE)
    mask = TopologicalLabelMap(local).order_mask
    for c in (0, 1, 2):
        m = mask(c)
        vals = local[m]
        out[m] = relabel[c][np.where(vals > 0, vals + int(offsets_row[c]), 0)]
    m3 = mask(3)
    out[m3] = local[m3]
    return out


@dataclass
class BlockwiseExtraction:
    spec: BlockSpec
    blocks: List[Block]
    results: List[BlockResult]
    offsets: OffsetTable
    tables: GlobalTables
    max_segment_label: int
    segment_count: int
    store: Optional["GridStore"] = None

    @property
    def counts(self) -> Dict[int, int]:
        """Global component counts for orders 0..3 (order 3: distinct segment labels)."""
        out = {c: self.tables.max_labels[c] for c in ORDERS}
        out[3] = self.segment_count
        return out

    def label_map(self) -> TopologicalLabelMap:
        """Assemble the global topological label map (needs the whole grid in memory)."""
        out = np.zeros(self.spec.volume_shape.topological, dtype=LABEL_DTYPE)
        for block, result in zip(self.blocks, self.results):
            out[block.topological_slices] = globalize(
                result.local_tau, self.offsets.offsets[block.index], self.tables.relabel
            )
        return TopologicalLabelMap(out)


def _open_input(sigma):
    if isinstance(sigma, (str, os.PathLike)):
        return read_array(Path(sigma), mmap=True)
    return sigma


def extract_blockwise(
    sigma,
    block_shape,
    workers: int = 1,
    store=None,
    curve_merging: bool = True,
    force: bool = False,
) -> BlockwiseExtraction:
    """Label ``sigma`` block by block and reconcile into one global labeling.

    ``sigma`` is an array or a path to an array file (read block by block).
    If ``store`` is a path or ``GridStore``, block results are persisted as
    soon as they are computed and only their small tables stay in memory.
    ``curve_merging=False`` skips the final curve-merging pass; the result is
    then generally wrong and exists to demonstrate why that pass is needed.
    """
    from .store import GridStore

    sigma = _open_input(sigma)
    if np.ndim(sigma) != 3:
        raise ValueError(f"segment label map must be 3D, got shape {np.shape(sigma)}")
    spec = BlockSpec(tuple(block_shape), GridShape.of(np.shape(sigma)))
    blocks = decompose(spec)
    workers = max(1, int(workers))
    if store is not None and not isinstance(store, GridStore):
        store = GridStore.create(store, spec, force=force)

    def run(block: Block) -> BlockResult:
        try:
            result = process_block(sigma, block)
            if store is not None:
                store.write_block(result)
                segments = result.segments
                result = store.read_block(block.index)
                result.segments = segments
            return result
        except Exception as exc:
            raise BlockProcessingError(block.index, exc) from exc

    if workers == 1:
        results = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))

    offsets = compute_offsets(results)
    forest_1, forest_2 = reconcile(blocks, results, offsets)
    if curve_merging:
        active_0 = merge_curves(results, offsets, forest_1, forest_2)
    else:
        active_0 = local_activity(offsets)
    tables = finalize(results, offsets, forest_1, forest_2, active_0)
    max_segment_label = max(int(r.max_labels[3]) for r in results)
    segment_count = int(np.unique(np.concatenate([r.segments for r in results])).size)
    if store is not None:
        store.finalize(offsets, tables, max_segment_label, segment_count)
    return BlockwiseExtraction(
        spec, blocks, results, offsets, tables, max_segment_label, segment_count, store
    )

