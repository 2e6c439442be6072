"""On-disk stores for labeled topological grids and per-component coordinate lists.

A ``GridStore`` directory holds one record group per block plus the global
relabelings; it answers "what is the label of cell t" with a constant number
of record reads. A ``GeometryStore`` holds, for every component, the list of
its cells split into one fragment per block.

GridStore layout::

    manifest.txt
    blocks/<b>/topological-grid.arr   block-local labels
    blocks/<b>/max-labels.arr         counts of 0-, 1-, 2-components, max segment label
    blocks/<b>/label-offsets.arr      offsets for orders 0, 1, 2
    blocks/<b>/neighborhood-{0,1,2}.arr
    blocks/<b>/junctions.arr          0-cells where curves meet: (label, six 1-labels)
    relabeling-{1,2}.arr              offset label l -> global label, at index l-1
    zero-cell-activity.arr            offset 0-label -> global 0-label or 0
    neighborhood-{0,1,2}.arr          global bounding relations

GeometryStore layout::

    manifest.txt
    0-cells.arr                       row q-1 is the coordinate of 0-component q
    {1,2,3}-components/bin-<q mod bins>/<q>-<p>.arr
    parts-counters-{1,2,3}.arr        fragments per component, at index q-1
"""
from __future__ import annotations

import functools
import os
import shutil
import tempfile
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .arrayfile import read_array, write_array
from .blockwise import (
    BlockResult,
    BlockSpec,
    GlobalTables,
    OffsetTable,
    decompose,
    globalize,
    owning_block_index,
)
from .labeling import LABEL_DTYPE, NeighborhoodTable, TopologicalLabelMap
from .topogrid import GridShape, cell_order

FORMAT_VERSION = 1
DEFAULT_BINS = 4096


class StoreError(RuntimeError):
    pass


class StoreStateError(StoreError):
    """The store is not in the state the operation needs (e.g. not finalized)."""


class ComponentNotFound(KeyError):
    pass


def default_bins() -> int:
    env = os.environ.get("VOLGEOM_BINS")
    return int(env) if env else DEFAULT_BINS


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split())


def write_manifest(path: Path, entries: Dict[str, object]) -> None:
    lines = []
    for key, value in entries.items():
        if isinstance(value, (tuple, list)):
            value = " ".join(str(v) for v in value)
        lines.append(f"{key} = {value}\n")
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text("".join(lines), encoding="utf-8")
    os.replace(tmp, path)


def read_manifest(path: Path, kind: str) -> Dict[str, str]:
    if not path.exists():
        raise StoreError(f"{path.parent} is not a {kind} store (no manifest)")
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    if out.get("format") != kind:
        raise StoreError(f"{path.parent}: expected format {kind!r}, found {out.get('format')!r}")
    if int(out.get("version", -1)) != FORMAT_VERSION:
        raise StoreError(f"{path.parent}: unsupported version {out.get('version')}")
    return out


def _prepare_root(root: Path, force: bool) -> None:
    if root.exists() and any(root.iterdir()):
        if not force:
            raise FileExistsError(f"{root} exists and is not empty; pass force to overwrite")
        shutil.rmtree(root)
    root.mkdir(parents=True, exist_ok=True)


class GridStore:
    KIND = "volgeom-grid"

    def __init__(self, root):
        self.root = Path(root)
        self._manifest = read_manifest(self.root / "manifest.txt", self.KIND)
        self.spec = BlockSpec(
            _ints(self._manifest["block-shape"]), GridShape.of(_ints(self._manifest["volume-shape"]))
        )
        self.blocks = decompose(self.spec)
        self._grid = functools.lru_cache(maxsize=64)(self._open_grid)
        self._offsets: Optional[np.ndarray] = None
        self._relabel: Dict[int, np.ndarray] = {}
        self._neighborhoods: Dict[int, NeighborhoodTable] = {}

    @classmethod
    def create(cls, root, spec: BlockSpec, force: bool = False) -> "GridStore":
        root = Path(root)
        _prepare_root(root, force)
        (root / "blocks").mkdir()
        write_manifest(
            root / "manifest.txt",
            {
                "format": cls.KIND,
                "version": FORMAT_VERSION,
                "volume-shape": spec.volume_shape.voxels,
                "block-shape": spec.block_shape,
                "block-count": len(decompose(spec)),
                "finalized": 0,
            },
        )
        return cls(root)

    @classmethod
    def open(cls, root) -> "GridStore":
        return cls(root)

    # -- manifest -----------------------------------------------------------

    @property
    def finalized(self) -> bool:
        return self._manifest.get("finalized") == "1"

    @property
    def block_count(self) -> int:
        return int(self._manifest["block-count"])

    @property
    def offset_totals(self) -> tuple:
        return _ints(self._manifest["max-labels"])

    @property
    def component_counts(self) -> Dict[int, int]:
        """Global component counts for orders 0..3 (order 3: distinct segment labels)."""
        out = dict(zip((0, 1, 2), _ints(self._manifest["component-counts"])))
        out[3] = int(self._manifest["segment-count"])
        return out

    @property
    def max_segment_label(self) -> int:
        return int(self._manifest["max-segment-label"])

    def _require_finalized(self):
        if not self.finalized:
            raise StoreStateError(f"{self.root} has not been finalized")

    # -- blocks -------------------------------------------------------------

    def block_dir(self, index: int) -> Path:
        return self.root / "blocks" / str(index)

    def completed_blocks(self) -> list[int]:
        return sorted(int(p.name) for p in (self.root / "blocks").iterdir() if p.name.isdigit())

    def write_block(self, result: BlockResult) -> None:
        """Persist one block's records; safe to call concurrently for distinct blocks."""
        final = self.block_dir(result.index)
        if not 0 <= result.index < self.block_count:
            raise StoreError(f"block index {result.index} outside 0..{self.block_count - 1}")
        if final.exists():
            raise FileExistsError(f"block {result.index} already written")
        tmp = Path(tempfile.mkdtemp(prefix=f".{result.index}-", dir=self.root / "blocks"))
        try:
            write_array(tmp / "topological-grid.arr", np.asarray(result.local_tau, dtype=LABEL_DTYPE))
            write_array(tmp / "max-labels.arr", np.array(result.max_labels, dtype=np.uint32))
            for c in (0, 1, 2):
                write_array(tmp / f"neighborhood-{c}.arr", result.neighborhoods[c].rows)
            write_array(tmp / "junctions.arr", np.asarray(result.junctions, dtype=np.uint32).reshape(-1, 7))
            os.rename(tmp, final)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise

    def _open_grid(self, index: int) -> np.ndarray:
        return read_array(self.block_dir(index) / "topological-grid.arr", mmap=True)

    def block_grid(self, index: int) -> np.ndarray:
        return self._grid(index)

    def read_block(self, index: int) -> BlockResult:
        """Block record with its grid memory-mapped rather than loaded."""
        d = self.block_dir(index)
        return BlockResult(
            index=index,
            local_tau=self.block_grid(index),
            max_labels=tuple(int(v) for v in read_array(d / "max-labels.arr")),
            neighborhoods={c: NeighborhoodTable(c, read_array(d / f"neighborhood-{c}.arr")) for c in (0, 1, 2)},
            junctions=read_array(d / "junctions.arr").reshape(-1, 7),
        )

    # -- finalization -------------------------------------------------------

    def finalize(
        self, offsets: OffsetTable, tables: GlobalTables, max_segment_label: int, segment_count: int
    ) -> None:
        missing = set(range(self.block_count)) - set(self.completed_blocks())
        if missing:
            raise StoreStateError(f"blocks not written: {sorted(missing)}")
        for b in range(self.block_count):
            write_array(self.block_dir(b) / "label-offsets.arr", offsets.offsets[b].astype(np.uint32))
        write_array(self.root / "relabeling-1.arr", tables.relabel[1][1:].astype(np.uint32))
        write_array(self.root / "relabeling-2.arr", tables.relabel[2][1:].astype(np.uint32))
        write_array(self.root / "zero-cell-activity.arr", tables.relabel[0][1:].astype(np.uint32))
        for c in (0, 1, 2):
            write_array(self.root / f"neighborhood-{c}.arr", tables.neighborhoods[c].rows)
        self._manifest.update(
            {
                "finalized": "1",
                "max-labels": " ".join(str(v) for v in offsets.totals),
                "component-counts": " ".join(str(v) for v in tables.max_labels),
                "max-segment-label": str(max_segment_label),
                "segment-count": str(segment_count),
            }
        )
        write_manifest(self.root / "manifest.txt", self._manifest)
        self._offsets = None
        self._relabel.clear()
        self._neighborhoods.clear()

    # -- queries ------------------------------------------------------------

    def offsets(self) -> np.ndarray:
        self._require_finalized()
        if self._offsets is None:
            self._offsets = np.stack(
                [read_array(self.block_dir(b) / "label-offsets.arr") for b in range(self.block_count)]
            ).astype(np.int64)
        return self._offsets

    def relabeling(self, order: int) -> np.ndarray:
        """Offset label -> global label over ``0..M_order`` (index 0 maps to 0)."""
        self._require_finalized()
        if order not in self._relabel:
            name = "zero-cell-activity.arr" if order == 0 else f"relabeling-{order}.arr"
            stored = read_array(self.root / name).astype(np.int64)
            expected = self.offset_totals[order]
            if stored.shape != (expected,):
                raise StoreError(f"{name} has {stored.size} entries, expected {expected}")
            self._relabel[order] = np.concatenate([[0], stored])
        return self._relabel[order]

    def neighborhood(self, order: int) -> NeighborhoodTable:
        self._require_finalized()
        if order not in self._neighborhoods:
            rows = read_array(self.root / f"neighborhood-{order}.arr")
            self._neighborhoods[order] = NeighborhoodTable(order, rows)
        return self._neighborhoods[order]

    def query_label(self, t) -> tuple[int, int]:
        """``(cell order, global label)`` of 1-based cell ``t``; label 0 means inactive."""
        self._require_finalized()
        b = owning_block_index(self.spec, t)
        block = self.blocks[b]
        i, j, k = (int(x) - 1 - o for x, o in zip(t, block.topological_origin))
        local = int(self.block_grid(b)[i, j, k])
        order = cell_order(t)
        if order == 3 or local == 0:
            return order, local
        return order, int(self.relabeling(order)[local + int(self.offsets()[b, order])])

    def neighbors(self, order: int, q: int) -> list[int]:
        """Global labels of the (order+1)-components bounded by component ``q``."""
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        try:
            return self.neighborhood(order).bounded(q)
        except KeyError:
            raise ComponentNotFound(f"no {order}-component with label {q}") from None

    def label_map(self) -> TopologicalLabelMap:
        """Assemble the whole global label map in memory (small volumes only)."""
        self._require_finalized()
        out = np.zeros(self.spec.volume_shape.topological, dtype=LABEL_DTYPE)
        relabel = {c: self.relabeling(c) for c in (0, 1, 2)}
        for block in self.blocks:
            out[block.topological_slices] = globalize(
                self.block_grid(block.index), self.offsets()[block.index], relabel
            )
        return TopologicalLabelMap(out)


class GeometryStore:
    KIND = "volgeom-geometry"

    def __init__(self, root):
        self.root = Path(root)
        self._manifest = read_manifest(self.root / "manifest.txt", self.KIND)
        self.bins = int(self._manifest["number-of-bins"])
        self.shape = GridShape.of(_ints(self._manifest["segmentation-shape"]))
        self.max_labels = dict(zip((0, 1, 2, 3), _ints(self._manifest["max-labels"])))
        self._parts: Dict[int, np.ndarray] = {}
        self._zero: Optional[np.ndarray] = None

    @classmethod
    def open(cls, root) -> "GeometryStore":
        return cls(root)

    def parts_counters(self, order: int) -> np.ndarray:
        if order not in self._parts:
            self._parts[order] = read_array(self.root / f"parts-counters-{order}.arr")
        return self._parts[order]

    def zero_cells(self) -> np.ndarray:
        if self._zero is None:
            self._zero = read_array(self.root / "0-cells.arr").reshape(-1, 3)
        return self._zero

    def fragment_path(self, order: int, q: int, p: int) -> Path:
        return self.root / f"{order}-components" / f"bin-{q % self.bins}" / f"{q}-{p}.arr"

    def read_component(self, order: int, q: int) -> np.ndarray:
        """1-based coordinates of every cell of component ``q``, as an (n, 3) array."""
        if order == 0:
            zero = self.zero_cells()
            if not 1 <= q <= len(zero):
                raise ComponentNotFound(f"no 0-component with label {q}")
            return zero[q - 1 : q].astype(np.int64)
        if order not in (1, 2, 3):
            raise ValueError(f"order must be 0..3, got {order}")
        parts = self.parts_counters(order)
        if not 1 <= q <= len(parts) or parts[q - 1] == 0:
            raise ComponentNotFound(f"no {order}-component with label {q}")
        frags = [read_array(self.fragment_path(order, q, p)) for p in range(int(parts[q - 1]))]
        return np.concatenate(frags).reshape(-1, 3).astype(np.int64)


def _owned_slices(block) -> tuple:
    """Cells of the block not shared with an earlier block along any axis."""
    return tuple(slice(1 if g > 0 else 0, None) for g in block.grid_index)


def write_geometry(grid: GridStore, root, bins: Optional[int] = None, force: bool = False) -> GeometryStore:
    """Write the coordinate list of every component, streaming one block at a time."""
    if not isinstance(grid, GridStore):
        grid = GridStore(grid)
    grid._require_finalized()
    bins = default_bins() if bins is None else int(bins)
    if bins < 1:
        raise ValueError("number of bins must be positive")
    root = Path(root)
    _prepare_root(root, force)
    counts = grid.component_counts
    sizes = {1: counts[1], 2: counts[2], 3: grid.max_segment_label}
    parts = {j: np.zeros(sizes[j], dtype=np.uint32) for j in (1, 2, 3)}
    relabel = {c: grid.relabeling(c) for c in (0, 1, 2)}
    made_dirs = set()
    zero_labels, zero_coords = [], []

    for block in grid.blocks:
        own = _owned_slices(block)
        full = globalize(grid.block_grid(block.index), grid.offsets()[block.index], relabel)
        order_mask = TopologicalLabelMap(full).order_mask
        labels = full[own]
        origin = np.array(
            [o + (s.start or 0) for o, s in zip(block.topological_origin, own)], dtype=np.int64
        )
        for j in (0, 1, 2, 3):
            m = order_mask(j)[own] & (labels != 0)
            if not m.any():
                continue
            coords = np.argwhere(m) + origin + 1
            vals = labels[m].astype(np.int64)
            if j == 0:
                zero_labels.append(vals)
                zero_coords.append(coords)
                continue
            order = np.argsort(vals, kind="stable")
            vals, coords = vals[order], coords[order]
            uniq, starts = np.unique(vals, return_index=True)
            ends = np.append(starts[1:], len(vals))
            for q, s, e in zip(uniq.tolist(), starts.tolist(), ends.tolist()):
                p = int(parts[j][q - 1])
                path = root / f"{j}-components" / f"bin-{q % bins}"
                if path not in made_dirs:
                    path.mkdir(parents=True, exist_ok=True)
                    made_dirs.add(path)
                write_array(path / f"{q}-{p}.arr", coords[s:e].astype(np.uint32))
                parts[j][q - 1] = p + 1

    if zero_labels:
        zl = np.concatenate(zero_labels)
        zc = np.concatenate(zero_coords)[np.argsort(zl, kind="stable")]
    else:
        zc = np.zeros((0, 3), dtype=np.int64)
    write_array(root / "0-cells.arr", zc.astype(np.uint32))
    for j in (1, 2, 3):
        write_array(root / f"parts-counters-{j}.arr", parts[j])
    write_manifest(
        root / "manifest.txt",
        {
            "format": GeometryStore.KIND,
            "version": FORMAT_VERSION,
            "number-of-bins": bins,
            "segmentation-shape": grid.spec.volume_shape.voxels,
            "max-labels": (counts[0], counts[1], counts[2], grid.max_segment_label),
        },
    )
    return GeometryStore(root)
