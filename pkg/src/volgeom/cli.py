"""Command-line interface: ``volgeom extract | geometry | query | component | neighbors | stats | verify | fixture``.

Results go to stdout as ``key=value`` lines or coordinate rows; diagnostics
and timings go to stderr. Exit status is 0 on success, 1 on a failed check
or missing component, 2 on bad usage or unreadable input.
"""
from __future__ import annotations

import argparse
import logging
import shutil
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .arrayfile import ArrayFormatError, read_array, read_raw
from .blockwise import BlockProcessingError, default_workers, extract_blockwise
from .labeling import disconnected_segments
from .store import ComponentNotFound, GeometryStore, GridStore, StoreError, default_bins, write_geometry
from .verify import verify_pipeline

log = logging.getLogger("volgeom")

FIXTURES = {"fig5": "fig5a.arr", "random50": "random50.arr"}


class UsageError(Exception):
    pass


def load_segmentation(path, shape=None, element_width=None):
    """Open an input volume: an array file, or raw data when ``shape`` is given."""
    if shape is not None or element_width is not None:
        if shape is None or element_width is None:
            raise UsageError("raw input needs both --shape and --element-width")
        if element_width not in (1, 2, 4):
            raise UsageError("--element-width must be 1, 2 or 4")
        return read_raw(path, shape, element_width)
    return read_array(path, mmap=True)


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise UsageError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return Path(str(resources.files("volgeom") / "data" / FIXTURES[name]))


def _print_counts(counts: dict) -> None:
    for c in (3, 2, 1, 0):
        print(f"{c}-components={counts[c]}")


def _dir_size(root: Path) -> int:
    return sum(p.stat().st_size for p in root.rglob("*") if p.is_file())


def cmd_extract(args) -> int:
    sigma = load_segmentation(args.input, args.shape, args.element_width)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if args.validate:
        bad = disconnected_segments(np.asarray(sigma))
        if bad:
            shown = ", ".join(str(v) for v in bad[:10])
            print(f"warning: {len(bad)} segment labels are not connected: {shown}", file=sys.stderr)
    if args.skip_step_4:
        print("warning: curve merging disabled; the result is not a correct labeling", file=sys.stderr)
    start = time.perf_counter()
    result = extract_blockwise(
        sigma,
        args.blocks,
        workers=args.workers,
        store=args.out,
        curve_merging=not args.skip_step_4,
        force=args.force,
    )
    elapsed = time.perf_counter() - start
    _print_counts(result.counts)
    print(f"blocks={len(result.blocks)}")
    print(f"extract took {elapsed:.3f} s", file=sys.stderr)
    if args.geometry:
        start = time.perf_counter()
        write_geometry(result.store, args.geometry, bins=args.bins, force=args.force)
        print(f"geometry took {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return 0


def cmd_geometry(args) -> int:
    grid = GridStore.open(args.grid)
    start = time.perf_counter()
    geom = write_geometry(grid, args.out, bins=args.bins, force=args.force)
    print(f"geometry took {time.perf_counter() - start:.3f} s", file=sys.stderr)
    print(f"segment-lists={int((geom.parts_counters(3) > 0).sum())}")
    print(f"face-lists={int((geom.parts_counters(2) > 0).sum())}")
    print(f"curve-lists={int((geom.parts_counters(1) > 0).sum())}")
    print(f"points={len(geom.zero_cells())}")
    return 0


def cmd_query(args) -> int:
    order, label = GridStore.open(args.grid).query_label(tuple(args.cell))
    print(f"order={order} label={label}")
    return 0


def cmd_component(args) -> int:
    coords = GeometryStore.open(args.geometry).read_component(args.order, args.label)
    for row in coords.tolist():
        print(*row)
    return 0


def cmd_neighbors(args) -> int:
    labels = GridStore.open(args.grid).neighbors(args.order, args.label)
    print(*labels)
    return 0


def cmd_stats(args) -> int:
    grid = GridStore.open(args.grid)
    print(f"volume-shape={' '.join(map(str, grid.spec.volume_shape.voxels))}")
    print(f"block-shape={' '.join(map(str, grid.spec.block_shape))}")
    print(f"blocks={grid.block_count}")
    print(f"finalized={int(grid.finalized)}")
    if grid.finalized:
        _print_counts(grid.component_counts)
        print(f"max-segment-label={grid.max_segment_label}")
    print(f"grid-bytes={_dir_size(grid.root)}")
    if args.geometry:
        print(f"geometry-bytes={_dir_size(Path(args.geometry))}")
    return 0


def cmd_verify(args) -> int:
    sigma = np.asarray(load_segmentation(args.input, args.shape, args.element_width))
    report = verify_pipeline(sigma, args.blocks, curve_merging=not args.skip_step_4, workers=args.workers)
    print(report.summary())
    return 0 if report.isomorphic else 1


def cmd_fixture(args) -> int:
    src = fixture_path(args.name)
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"{out} exists; pass --force to overwrite")
    shutil.copyfile(src, out)
    print(f"shape={' '.join(map(str, read_array(out).shape))}")
    return 0


def _input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="segmentation: array file, or raw data with --shape")
    p.add_argument("--blocks", nargs=3, type=int, required=True, metavar=("B1", "B2", "B3"),
                   help="block shape in voxels, overlap included")
    p.add_argument("--shape", nargs=3, type=int, metavar=("N1", "N2", "N3"),
                   help="volume shape of a raw (headerless) input")
    p.add_argument("--element-width", type=int, help="bytes per voxel of a raw input")
    p.add_argument("--workers", type=int, default=default_workers(),
                   help="parallel block workers (default: $VOLGEOM_WORKERS or CPU count)")
    p.add_argument("--skip-step-4", action="store_true",
                   help="DANGEROUS: skip curve merging; output is wrong whenever curves cross blocks")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volgeom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="label a segmentation block-wise into a grid store")
    _input_args(p)
    p.add_argument("--out", required=True, help="grid store directory")
    p.add_argument("--force", action="store_true", help="overwrite existing stores")
    p.add_argument("--validate", action="store_true", help="warn about disconnected segment labels")
    p.add_argument("--geometry", help="also write a geometry store here")
    p.add_argument("--bins", type=int, default=default_bins())
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("geometry", help="write per-component coordinate lists")
    p.add_argument("grid")
    p.add_argument("out")
    p.add_argument("--bins", type=int, default=default_bins())
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("query", help="order and global label of one cell")
    p.add_argument("grid")
    p.add_argument("cell", nargs=3, type=int, metavar="T")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("component", help="coordinates of one component")
    p.add_argument("geometry")
    p.add_argument("order", type=int)
    p.add_argument("label", type=int)
    p.set_defaults(func=cmd_component)

    p = sub.add_parser("neighbors", help="higher-order components bounded by one component")
    p.add_argument("grid")
    p.add_argument("order", type=int)
    p.add_argument("label", type=int)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("stats", help="component counts and store sizes")
    p.add_argument("grid")
    p.add_argument("--geometry")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("verify", help="compare block-wise and whole-volume labeling")
    _input_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fixture", help="write a bundled example segmentation")
    p.add_argument("name", choices=sorted(FIXTURES))
    p.add_argument("out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (ComponentNotFound, KeyError) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 1
    except (UsageError, FileExistsError, FileNotFoundError, ArrayFormatError, StoreError,
            ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BlockProcessingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
