"""Slow, literal reference labeling used as a test oracle.

Follows the component definition directly: compute bounded sets from the
final labels of the next-higher order, then group active cells with equal
bounded sets that are linked by the connectivity relation. Shares nothing
with the compiled kernels except the grid relations in ``topogrid``.
"""
from collections import Counter, deque

import numpy as np

from volgeom.topogrid import GridShape, cell_order, connected_neighbors, gamma


def once_literal(values):
    counts = Counter(values)
    return tuple(sorted(v for v in values if v != 0 and counts[v] == 1))


def reference_labeling(sigma):
    """Return ``(labels, bounded)``: dict cell -> label (0 inactive) and
    dict (order, label) -> frozenset of bounded higher-order labels."""
    sigma = np.asarray(sigma)
    shape = GridShape.of(sigma.shape)
    by_order = {j: [] for j in range(4)}
    for t in shape.cells():
        by_order[cell_order(t)].append(t)
    labels = {}
    bounded = {}
    for t in by_order[3]:
        labels[t] = int(sigma[(t[0] - 1) // 2, (t[1] - 1) // 2, (t[2] - 1) // 2])
    for j in (2, 1, 0):
        theta = {t: once_literal([labels[u] for u in gamma(t, shape)]) for t in by_order[j]}
        next_label = 0
        for t in by_order[j]:
            if t in labels:
                continue
            if not theta[t]:
                labels[t] = 0
                continue
            next_label += 1
            bounded[(j, next_label)] = frozenset(theta[t])
            labels[t] = next_label
            queue = deque([t])
            while queue:
                u = queue.popleft()
                for v in connected_neighbors(u, shape):
                    if v not in labels and theta[v] == theta[t]:
                        labels[v] = next_label
                        queue.append(v)
    return labels, bounded


def reference_map(sigma) -> np.ndarray:
    labels, _ = reference_labeling(sigma)
    shape = GridShape.of(np.shape(sigma))
    out = np.zeros(shape.topological, dtype=np.uint32)
    for t, v in labels.items():
        out[t[0] - 1, t[1] - 1, t[2] - 1] = v
    return out
