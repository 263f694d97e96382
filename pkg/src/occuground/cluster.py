"""Deterministic density clustering over 3D points, plus the affinity-to-center
shift that collapses an instance's voxels onto one location before clustering."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import AffinityField

NOISE = 0


@dataclass(frozen=True)
class ClusterParams:
    """eps is a radius in voxel-index units; min_pts counts the point itself."""

    eps: float = 1.5
    min_pts: int = 4

    def __post_init__(self):
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be at least 1, got {self.min_pts}")


@dataclass(frozen=True)
class ClusterLabels:
    """Per-point cluster id, 1..n_clusters contiguous; NOISE (0) for outliers."""

    labels: np.ndarray
    n_clusters: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)


def predicted_centers(positions, affinity: AffinityField) -> np.ndarray:
    """Shift voxel positions by their affinity vectors: center = position - affinity.

    Positions are integer (i, j, k) indices; output is (N, 3) float64 in
    continuous voxel-index units.
    """
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 3)
    dims = np.asarray(affinity.meta.dims)
    if pos.size and (np.any(pos < 0) or np.any(pos >= dims)):
        bad = pos[np.any((pos < 0) | (pos >= dims), axis=1)][0]
        raise ValueError(f"position {tuple(bad)} outside grid dims {affinity.meta.dims}")
    if pos.size == 0:
        return np.zeros((0, 3))
    vecs = affinity.values[pos[:, 0], pos[:, 1], pos[:, 2]].astype(np.float64)
    return pos.astype(np.float64) - vecs


class _BucketIndex:
    """Uniform-grid spatial hash with cell edge eps; queries gather the 27
    surrounding buckets and filter by exact distance."""

    def __init__(self, points: np.ndarray, eps: float):
        self.points = points
        self.eps2 = eps * eps
        cells = np.floor(points / eps).astype(np.int64)
        self.buckets: dict[tuple[int, int, int], list[int]] = {}
        for i, c in enumerate(map(tuple, cells)):
            self.buckets.setdefault(c, []).append(i)
        self.cells = cells

    def query(self, i: int) -> np.ndarray:
        """Indices within eps of point i, ascending (includes i itself)."""
        cx, cy, cz = self.cells[i]
        cand: list[int] = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    cand.extend(self.buckets.get((cx + dx, cy + dy, cz + dz), ()))
        cand_arr = np.sort(np.asarray(cand, dtype=np.int64))
        d = self.points[cand_arr] - self.points[i]
        return cand_arr[np.einsum("ij,ij->i", d, d) <= self.eps2]


def dbscan(points, params: ClusterParams) -> ClusterLabels:
    """Standard density clustering with a fixed deterministic order.

    Points are processed in input order and cluster ids assigned in discovery
    order; border points join the first core cluster that reaches them. The
    result is a pure function of (points, params).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    n = len(pts)
    labels = np.full(n, -1, dtype=np.int32)  # -1 = unvisited
    if n == 0:
        return ClusterLabels(np.zeros(0, dtype=np.int32), 0)

    index = _BucketIndex(pts, params.eps)
    cid = 0
    for p in range(n):
        if labels[p] != -1:
            continue
        neighbors = index.query(p)
        if len(neighbors) < params.min_pts:
            labels[p] = NOISE
            continue
        cid += 1
        labels[p] = cid
        seeds = deque(int(q) for q in neighbors if labels[q] == -1 or labels[q] == NOISE)
        while seeds:
            q = seeds.popleft()
            if labels[q] == NOISE:
                labels[q] = cid  # border point claimed by the first cluster to reach it
                continue
            if labels[q] != -1:
                continue
            labels[q] = cid
            q_neighbors = index.query(q)
            if len(q_neighbors) >= params.min_pts:
                seeds.extend(int(r) for r in q_neighbors if labels[r] == -1 or labels[r] == NOISE)
    return ClusterLabels(labels, cid)
