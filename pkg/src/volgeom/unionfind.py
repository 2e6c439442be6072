from __future__ import annotations

import numpy as np


class DisjointSet:
    """Union-find over the labels ``1..n`` with union by size and path compression.

    Label 0 is a fixed singleton so that label arrays containing zeros can be
    mapped through ``roots()`` directly.
    """

    def __init__(self, n: int):
        self.n = int(n)
        self.parent = np.arange(self.n + 1, dtype=np.int64)
        self.size = np.ones(self.n + 1, dtype=np.int64)

    def find(self, a: int) -> int:
        parent = self.parent
        root = int(a)
        while parent[root] != root:
            root = int(parent[root])
        while parent[a] != root:
            parent[a], a = root, int(parent[a])
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of ``a`` and ``b``; return False if already merged."""
        if a == 0 or b == 0:
            raise ValueError("label 0 cannot be merged")
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def union_pairs(self, pairs: np.ndarray) -> int:
        """Union every row ``(a, b)``; return how many merges happened."""
        merged = 0
        for a, b in np.asarray(pairs, dtype=np.int64).reshape(-1, 2).tolist():
            merged += self.union(a, b)
        return merged

    def roots(self) -> np.ndarray:
        """Representative of every label ``0..n`` (fully compresses the forest)."""
        parent = self.parent
        while True:
            grand = parent[parent]
            if np.array_equal(grand, parent):
                return parent.copy()
            parent[:] = grand
