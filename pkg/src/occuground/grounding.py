"""From a 2D mask to a 3D voxel instance: ray-cast candidate voxels, drop
background, cluster shifted centers, and pick the nearest cluster so that the
occluding object wins. Also full-grid instance segmentation from an affinity
field, with no mask involved."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .camera import PinholeCamera, cover_range, pixel_to_ray, traverse_grid
from .cluster import ClusterParams, dbscan, predicted_centers
from .grid import (
    AffinityField,
    GridMeta,
    InstanceMap,
    InstanceRecord,
    SemanticGrid,
    flatten_index,
    linear_indices,
    require_same_meta,
    voxel_to_world,
)
from .labeling import instance_center


class NoForegroundError(RuntimeError):
    """Candidate voxels existed but every one of them was background.

    Carries the (empty) grounding result so callers can still emit it.
    """

    def __init__(self, result: "GroundingResult"):
        super().__init__("every candidate voxel is background or empty")
        self.result = result


@dataclass(frozen=True)
class Mask2D:
    """Row-major boolean pixel mask; dimensions must match the paired camera."""

    width: int
    height: int
    flags: np.ndarray  # (height, width) bool

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.shape != (self.height, self.width):
            raise ValueError(f"mask flags shape {flags.shape} != (h={self.height}, w={self.width})")
        flags = np.ascontiguousarray(flags)
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @classmethod
    def from_pixels(cls, width: int, height: int, pixels) -> "Mask2D":
        flags = np.zeros((height, width), dtype=bool)
        for u, v in pixels:
            u, v = int(u), int(v)
            if not (0 <= u < width and 0 <= v < height):
                raise ValueError(f"pixel ({u}, {v}) outside image {width}x{height}")
            flags[v, u] = True
        return cls(width, height, flags)

    def pixel_count(self) -> int:
        return int(np.count_nonzero(self.flags))


@dataclass(frozen=True)
class BackgroundList:
    """Class ids that can never be grounded; id 0 (empty) is always implied."""

    ids: frozenset[int]

    def __post_init__(self):
        ids = frozenset(int(i) for i in self.ids)
        if any(i < 0 for i in ids):
            raise ValueError("background class ids must be non-negative")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def from_names(cls, names, class_table) -> "BackgroundList":
        table = list(class_table)
        ids = set()
        for name in names:
            if name not in table:
                raise KeyError(f"unknown background class name {name!r}")
            ids.add(table.index(name))
        return cls(frozenset(ids))

    def validate_against(self, class_table) -> None:
        bad = [i for i in self.ids if i >= len(class_table)]
        if bad:
            raise ValueError(f"background ids {sorted(bad)} outside class table of {len(class_table)}")

    def excludes(self, class_id: int) -> bool:
        return class_id == 0 or class_id in self.ids


@dataclass(frozen=True)
class ForegroundVoxel:
    ijk: tuple[int, int, int]
    class_id: int
    center: tuple[float, float, float]  # predicted instance center, voxel units


@dataclass(frozen=True)
class GroundingCluster:
    voxels: tuple[tuple[int, int, int], ...]
    center: tuple[float, float, float]  # mean predicted center, voxel units
    class_id: int
    depth: float  # meters from camera origin to nearest member voxel center


@dataclass(frozen=True)
class GroundingResult:
    selected: GroundingCluster | None
    clusters: tuple[GroundingCluster, ...]
    noise_count: int
    params: ClusterParams = field(default_factory=ClusterParams)


def candidate_voxels(mask: Mask2D, cam: PinholeCamera, meta: GridMeta) -> list[tuple[int, int, int]]:
    """Every voxel on some set pixel's ray, deduplicated in first-encounter
    order: pixels scan row-major, each ray near-to-far."""
    if (mask.width, mask.height) != (cam.width, cam.height):
        raise ValueError(
            f"mask is {mask.width}x{mask.height} but camera image is {cam.width}x{cam.height}"
        )
    max_range = cover_range(cam.translation, meta)
    seen: set[tuple[int, int, int]] = set()
    out: list[tuple[int, int, int]] = []
    for v, u in np.argwhere(mask.flags):
        ray = pixel_to_ray(cam, (float(u) + 0.5, float(v) + 0.5))
        for ijk in traverse_grid(ray, meta, max_range):
            if ijk not in seen:
                seen.add(ijk)
                out.append(ijk)
    return out


def filter_foreground(
    candidates,
    sem: SemanticGrid,
    affinity: AffinityField,
    bg: BackgroundList,
) -> list[ForegroundVoxel]:
    """Keep candidates with a groundable (nonzero, non-background) label and
    attach each one's predicted instance center."""
    require_same_meta(sem.meta, affinity.meta)
    bg.validate_against(sem.class_table)
    kept = []
    kept_idx = []
    for ijk in candidates:
        i, j, k = ijk
        if not sem.meta.contains_index((i, j, k)):
            raise ValueError(f"candidate {tuple(ijk)} outside grid dims {sem.meta.dims}")
        cls = int(sem.labels[i, j, k])
        if bg.excludes(cls):
            continue
        kept.append(((int(i), int(j), int(k)), cls))
        kept_idx.append((i, j, k))
    if not kept:
        return []
    centers = predicted_centers(kept_idx, affinity)
    return [
        ForegroundVoxel(ijk, cls, tuple(map(float, c)))
        for (ijk, cls), c in zip(kept, centers)
    ]


def _materialize_clusters(
    foreground: list[ForegroundVoxel],
    labels: np.ndarray,
    n_clusters: int,
    meta: GridMeta,
    cam_origin: np.ndarray,
) -> tuple[list[GroundingCluster], list[tuple]]:
    """Build cluster summaries in discovery order, plus the selection sort key
    (depth, mean member depth, first-member linear index) for each."""
    clusters = []
    keys = []
    for cid in range(1, n_clusters + 1):
        members = [fv for fv, lab in zip(foreground, labels) if lab == cid]
        voxels = tuple(fv.ijk for fv in members)
        mean_center = np.mean([fv.center for fv in members], axis=0)
        class_ids = np.asarray([fv.class_id for fv in members])
        counts = np.bincount(class_ids)
        majority = int(np.flatnonzero(counts == counts.max())[0])
        world = np.stack([voxel_to_world(v, meta) for v in voxels])
        member_depths = np.linalg.norm(world - cam_origin, axis=1)
        depth = float(member_depths.min())
        clusters.append(GroundingCluster(voxels, tuple(map(float, mean_center)), majority, depth))
        keys.append((depth, float(member_depths.mean()), flatten_index(voxels[0], meta.dims)))
    return clusters, keys


def ground_mask(
    mask: Mask2D,
    cam: PinholeCamera,
    sem: SemanticGrid,
    affinity: AffinityField,
    bg: BackgroundList,
    params: ClusterParams = ClusterParams(),
) -> GroundingResult:
    """Resolve a 2D mask to the nearest 3D cluster of foreground voxels.

    The nearest (minimum-depth) cluster wins so that the physically occluding
    object is the one returned; depth ties fall back to mean member depth and
    then to the first member's linear index.

    Raises NoForegroundError when the mask's rays do cross the grid but every
    crossed voxel is background; a mask that misses the grid entirely returns
    an empty result instead.
    """
    candidates = candidate_voxels(mask, cam, sem.meta)
    foreground = filter_foreground(candidates, sem, affinity, bg)
    if not foreground:
        empty = GroundingResult(None, (), 0, params)
        if candidates:
            raise NoForegroundError(empty)
        return empty
    centers = np.asarray([fv.center for fv in foreground])
    labels = dbscan(centers, params)
    clusters, keys = _materialize_clusters(
        foreground, labels.labels, labels.n_clusters, sem.meta, cam.translation
    )
    selected = clusters[min(range(len(keys)), key=keys.__getitem__)] if clusters else None
    noise = int(np.count_nonzero(labels.labels == 0))
    return GroundingResult(selected, tuple(clusters), noise, params)


def instance_segment(
    sem: SemanticGrid,
    affinity: AffinityField,
    bg: BackgroundList,
    params: ClusterParams = ClusterParams(),
) -> InstanceMap:
    """Cluster every groundable voxel of the grid on predicted centers.

    Noise voxels keep id 0; surviving clusters are renumbered 1..N by smallest
    member linear index and their record centers are recomputed from member
    positions (not from the affinity shift).
    """
    require_same_meta(sem.meta, affinity.meta)
    bg.validate_against(sem.class_table)
    fg_mask = sem.labels != 0
    for b in sorted(bg.ids):
        fg_mask &= sem.labels != b
    coords = np.argwhere(fg_mask)
    if len(coords) == 0:
        return InstanceMap(sem.meta, np.zeros(sem.meta.dims, dtype=np.uint32), ())
    order = np.argsort(linear_indices(coords, sem.meta.dims), kind="stable")
    coords = coords[order]
    centers = predicted_centers(coords, affinity)
    labels = dbscan(centers, params)

    ids = np.zeros(sem.meta.dims, dtype=np.uint32)
    records = []
    by_cluster = []
    for cid in range(1, labels.n_clusters + 1):
        members = coords[labels.labels == cid]
        lin_min = int(linear_indices(members, sem.meta.dims).min())
        by_cluster.append((lin_min, members))
    by_cluster.sort(key=lambda t: t[0])
    for new_id, (_, members) in enumerate(by_cluster, start=1):
        ids[members[:, 0], members[:, 1], members[:, 2]] = new_id
        center = instance_center(members)
        member_classes = sem.labels[members[:, 0], members[:, 1], members[:, 2]]
        counts = np.bincount(member_classes)
        majority = int(np.flatnonzero(counts == counts.max())[0])
        records.append(InstanceRecord(new_id, majority, tuple(center), len(members)))
    return InstanceMap(sem.meta, ids, tuple(records))


# ---------------------------------------------------------------------------
# Result JSON (shared verbatim by the CLI and the HTTP service)
# ---------------------------------------------------------------------------


def _cluster_payload(c: GroundingCluster, class_table) -> dict:
    return {
        "voxels": [[int(i), int(j), int(k)] for i, j, k in c.voxels],
        "center": [float(x) for x in c.center],
        "class": class_table[c.class_id],
        "depth": c.depth,
    }


def result_to_json(result: GroundingResult, class_table) -> bytes:
    payload = {
        "selected": _cluster_payload(result.selected, class_table) if result.selected else None,
        "clusters": [_cluster_payload(c, class_table) for c in result.clusters],
        "noise_count": result.noise_count,
        "params": {"eps": result.params.eps, "min_pts": result.params.min_pts},
    }
    return (json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")
