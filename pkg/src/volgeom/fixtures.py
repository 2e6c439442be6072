"""Small example segmentations used by tests, docs and the CLI."""
from __future__ import annotations

import numpy as np


def fig5_volume() -> np.ndarray:
    """The 3x3x2 six-segment volume whose block-wise labeling needs curve merging.

    Indexed ``[row, column, z]``.
    """
    z1 = [[1, 1, 1],
          [1, 2, 1],
          [1, 1, 3]]
    z2 = [[4, 4, 4],
          [4, 5, 4],
          [4, 4, 6]]
    return np.ascontiguousarray(np.stack([z1, z2], axis=-1).astype(np.uint32))


def random_labels(shape, n_labels: int, seed=None) -> np.ndarray:
    """Independent uniform labels in ``1..n_labels`` per voxel."""
    rng = np.random.default_rng(seed)
    return rng.integers(1, n_labels + 1, size=tuple(shape), dtype=np.uint32)


def random_segmentation(shape, n_segments: int, seed=None) -> np.ndarray:
    """Voronoi segmentation: each voxel takes the label of its nearest random seed."""
    from scipy.spatial import cKDTree

    rng = np.random.default_rng(seed)
    shape = tuple(int(n) for n in shape)
    seeds = rng.uniform(0, 1, size=(n_segments, 3)) * np.array(shape)
    grid = np.indices(shape, dtype=np.float32).reshape(3, -1).T + 0.5
    _, nearest = cKDTree(seeds).query(grid, workers=-1)
    return (nearest.astype(np.uint32) + 1).reshape(shape)
