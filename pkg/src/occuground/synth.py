"""Seeded synthetic indoor scenes and a first-hit voxel renderer.

Scenes are axis-aligned boxes over an optional room shell (floor plus two
walls). Box placement enforces two disciplines:

* a Chebyshev gap of at least 2 voxel indices between boxes, so a 26-neighbor
  connected-component pass recovers each box as one instance;
* disjoint, fully in-frame image-space footprints under the scene camera, so
  every box is completely visible and the rendered silhouette of an instance
  ray-covers all of its voxels.

Generation is a pure function of the spec: each object draws from its own
counter-based substream (Philox keyed by seed and object index), so the number
of rejected candidates for one object never shifts another object's draws.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import PinholeCamera, batch_first_hit, cover_range, pixel_rays, save_camera, load_camera
from .grid import (
    DEFAULT_BACKGROUND_NAMES,
    DEFAULT_CLASS_TABLE,
    GridMeta,
    InstanceMap,
    InstanceRecord,
    SemanticGrid,
    load_grid,
    load_instance_map,
    save_grid,
    save_instance_map,
    volume_to_linear,
)
from .grounding import Mask2D
from .labeling import connected_components

DEFAULT_DIMS = (64, 64, 32)
DEFAULT_VOXEL_SIZE = 0.08
DEFAULT_IMAGE_SIZE = (160, 120)
DEFAULT_FOCAL = 300.0
DEFAULT_SIZE_RANGE = ((3, 7), (3, 7), (3, 6))

# Placement margins, in pixels: boxes must project this far inside the frame,
# and projected footprints of two boxes must be separated by at least the pad.
_FRAME_MARGIN = 2.0
_FOOTPRINT_PAD = 2.0

_PLACEMENT_BATCH = 4096


class PlacementFailure(RuntimeError):
    """The rejection-sampling budget ran out before all boxes were placed."""


def default_background_ids(class_table=DEFAULT_CLASS_TABLE) -> frozenset[int]:
    return frozenset(class_table.index(n) for n in DEFAULT_BACKGROUND_NAMES)


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    meta: GridMeta
    object_count: int
    class_pool: tuple[int, ...]
    size_range: tuple[tuple[int, int], ...] = DEFAULT_SIZE_RANGE
    include_room_shell: bool = True

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must fit an unsigned 64-bit value, got {self.seed}")
        if self.object_count < 0:
            raise ValueError(f"object_count must be non-negative, got {self.object_count}")
        pool = tuple(int(c) for c in self.class_pool)
        bg = default_background_ids() | {0}
        if self.object_count > 0 and not pool:
            raise ValueError("class_pool must be non-empty when placing objects")
        for c in pool:
            if c in bg:
                raise ValueError(f"class_pool id {c} is background or empty")
            if c >= len(DEFAULT_CLASS_TABLE):
                raise ValueError(f"class_pool id {c} outside the class table")
        ranges = tuple((int(lo), int(hi)) for lo, hi in self.size_range)
        if len(ranges) != 3:
            raise ValueError("size_range needs one (lo, hi) pair per axis")
        interior = 1 if self.include_room_shell else 0
        for a, (lo, hi) in enumerate(ranges):
            if not (1 <= lo <= hi):
                raise ValueError(f"bad size range {ranges[a]} on axis {a}")
            if hi > self.meta.dims[a] - interior:
                raise ValueError(f"size range {ranges[a]} does not fit dims {self.meta.dims}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "object_count", int(self.object_count))
        object.__setattr__(self, "class_pool", pool)
        object.__setattr__(self, "size_range", ranges)


def default_scene_spec(seed: int, object_count: int, dims=DEFAULT_DIMS) -> SceneSpec:
    meta = GridMeta(tuple(dims), DEFAULT_VOXEL_SIZE, (0.0, 0.0, 0.0))
    bg = default_background_ids() | {0}
    pool = tuple(i for i in range(len(DEFAULT_CLASS_TABLE)) if i not in bg)
    return SceneSpec(seed, meta, object_count, pool)


@dataclass(frozen=True)
class Scene:
    sem: SemanticGrid
    gt_instances: InstanceMap
    camera: PinholeCamera


@dataclass(frozen=True)
class RenderedView:
    """First-hit images: per-pixel class id, instance id (0 = none), and entry
    depth in meters (+inf where the ray missed all geometry)."""

    width: int
    height: int
    class_ids: np.ndarray  # (h, w) uint8
    instance_ids: np.ndarray  # (h, w) uint32
    depth: np.ndarray  # (h, w) float64

    def __post_init__(self):
        cls = np.asarray(self.class_ids, dtype=np.uint8)
        ids = np.asarray(self.instance_ids, dtype=np.uint32)
        depth = np.asarray(self.depth, dtype=np.float64)
        shape = (self.height, self.width)
        if cls.shape != shape or ids.shape != shape or depth.shape != shape:
            raise ValueError("view buffers must all be (height, width)")
        if np.any((ids != 0) & (cls == 0)):
            raise ValueError("a pixel with an instance id must have a nonzero class")
        if np.any((cls != 0) & ~np.isfinite(depth)):
            raise ValueError("a pixel with a nonzero class must have finite depth")
        for arr in (cls, ids, depth):
            arr.setflags(write=False)
        object.__setattr__(self, "class_ids", cls)
        object.__setattr__(self, "instance_ids", ids)
        object.__setattr__(self, "depth", depth)


def default_camera(meta: GridMeta) -> PinholeCamera:
    """Camera outside the grid on the +x/+y/+z side, looking at the grid
    center, sized so one voxel covers roughly 1.5-3 pixels."""
    width, height = DEFAULT_IMAGE_SIZE
    center = meta.world_center()
    half_diag = 0.5 * meta.diagonal()
    out_dir = np.array([0.80, 0.65, 0.50])
    out_dir /= np.linalg.norm(out_dir)
    eye = center + 3.2 * half_diag * out_dir
    forward = center - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward], axis=1)
    return PinholeCamera(
        DEFAULT_FOCAL, DEFAULT_FOCAL, width / 2.0, height / 2.0, width, height, rotation, eye
    )


def scene_from_grid(sem: SemanticGrid, camera: PinholeCamera) -> Scene:
    """Wrap a semantic grid into a Scene: ground-truth instances are the
    26-connected components of the non-background classes."""
    full = connected_components(sem, 26)
    exclude = {sem.class_table.index(n) for n in DEFAULT_BACKGROUND_NAMES if n in sem.class_table}
    return Scene(sem, _drop_instance_classes(full, exclude), camera)


def _drop_instance_classes(inst: InstanceMap, exclude: set[int]) -> InstanceMap:
    keep = [r for r in inst.instances if r.class_id not in exclude]
    lut = np.zeros(len(inst.instances) + 1, dtype=np.uint32)
    records = []
    for new_id, r in enumerate(keep, start=1):
        lut[r.id] = new_id
        records.append(InstanceRecord(new_id, r.class_id, r.center, r.voxel_count))
    return InstanceMap(inst.meta, lut[inst.ids], tuple(records))


def _project_corners(cam: PinholeCamera, lo_w: np.ndarray, hi_w: np.ndarray):
    """Project the 8 corners of (b,) candidate world AABBs; returns per-candidate
    visibility and the projected 2D bounds (umin, vmin, umax, vmax)."""
    b = len(lo_w)
    corners = np.empty((b, 8, 3))
    for c in range(8):
        corners[:, c, 0] = lo_w[:, 0] if c & 1 == 0 else hi_w[:, 0]
        corners[:, c, 1] = lo_w[:, 1] if c & 2 == 0 else hi_w[:, 1]
        corners[:, c, 2] = lo_w[:, 2] if c & 4 == 0 else hi_w[:, 2]
    p_cam = (corners - cam.translation) @ cam.rotation
    z = p_cam[..., 2]
    in_front = np.all(z > 1e-9, axis=1)
    z_safe = np.where(z > 1e-9, z, 1.0)
    u = cam.fx * p_cam[..., 0] / z_safe + cam.cx
    v = cam.fy * p_cam[..., 1] / z_safe + cam.cy
    umin, umax = u.min(axis=1), u.max(axis=1)
    vmin, vmax = v.min(axis=1), v.max(axis=1)
    in_frame = (
        (umin >= _FRAME_MARGIN)
        & (umax <= cam.width - _FRAME_MARGIN)
        & (vmin >= _FRAME_MARGIN)
        & (vmax <= cam.height - _FRAME_MARGIN)
    )
    return in_front & in_frame, np.stack([umin, vmin, umax, vmax], axis=1)


def generate_scene(spec: SceneSpec) -> Scene:
    """Deterministically place boxes (and the room shell) and derive GT."""
    meta = spec.meta
    nx, ny, nz = meta.dims
    labels = np.zeros(meta.dims, dtype=np.uint8)
    camera = default_camera(meta)

    if spec.include_room_shell:
        floor_id = DEFAULT_CLASS_TABLE.index("floor")
        wall_id = DEFAULT_CLASS_TABLE.index("wall")
        labels[:, :, 0] = floor_id
        labels[0, :, :] = wall_id
        labels[:, 0, :] = wall_id

    pmin = 1 if spec.include_room_shell else 0
    dims = np.asarray(meta.dims, dtype=np.int64)
    lows = np.asarray([r[0] for r in spec.size_range], dtype=np.int64)
    highs = np.asarray([r[1] for r in spec.size_range], dtype=np.int64)
    origin = np.asarray(meta.origin, dtype=np.float64)

    placed_lo = np.zeros((0, 3), dtype=np.int64)
    placed_hi = np.zeros((0, 3), dtype=np.int64)
    placed_2d = np.zeros((0, 4), dtype=np.float64)
    budget = 10 * spec.object_count * spec.object_count

    for obj in range(spec.object_count):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=spec.seed, spawn_key=(obj,)))
        )
        cls = int(spec.class_pool[rng.integers(0, len(spec.class_pool))])
        placed = False
        while budget > 0:
            b = min(_PLACEMENT_BATCH, budget)
            sizes = rng.integers(lows, highs + 1, size=(b, 3))
            span = (dims - pmin - sizes + 1).astype(np.float64)
            pos = pmin + np.floor(rng.random((b, 3)) * span).astype(np.int64)
            lo_c, hi_c = pos, pos + sizes

            ok = np.ones(b, dtype=bool)
            if len(placed_lo):
                too_close = (lo_c[:, None, :] <= placed_hi[None]) & (
                    hi_c[:, None, :] >= placed_lo[None]
                )
                ok &= ~too_close.all(axis=2).any(axis=1)
            visible, uv = _project_corners(
                camera, origin + lo_c * meta.voxel_size, origin + hi_c * meta.voxel_size
            )
            ok &= visible
            if len(placed_2d):
                disjoint = (
                    (uv[:, None, 2] + _FOOTPRINT_PAD <= placed_2d[None, :, 0])
                    | (uv[:, None, 0] - _FOOTPRINT_PAD >= placed_2d[None, :, 2])
                    | (uv[:, None, 3] + _FOOTPRINT_PAD <= placed_2d[None, :, 1])
                    | (uv[:, None, 1] - _FOOTPRINT_PAD >= placed_2d[None, :, 3])
                )
                ok &= disjoint.all(axis=1)

            winners = np.flatnonzero(ok)
            if winners.size:
                w = int(winners[0])
                budget -= w + 1
                labels[lo_c[w, 0] : hi_c[w, 0], lo_c[w, 1] : hi_c[w, 1], lo_c[w, 2] : hi_c[w, 2]] = cls
                placed_lo = np.vstack([placed_lo, lo_c[w]])
                placed_hi = np.vstack([placed_hi, hi_c[w]])
                placed_2d = np.vstack([placed_2d, uv[w]])
                placed = True
                break
            budget -= b
        if not placed:
            raise PlacementFailure(
                f"placement failed: object {obj + 1} of {spec.object_count} found no "
                f"admissible position within the attempt budget"
            )

    sem = SemanticGrid(meta, labels, DEFAULT_CLASS_TABLE)
    return scene_from_grid(sem, camera)


def render_view(scene: Scene) -> RenderedView:
    """First nonzero-class voxel per pixel ray, with its instance id and the
    ray distance at which the voxel was entered."""
    cam = scene.camera
    meta = scene.sem.meta
    dirs = pixel_rays(cam)
    labels_flat = volume_to_linear(scene.sem.labels)
    ids_flat = volume_to_linear(scene.gt_instances.ids)
    hit, depth = batch_first_hit(
        cam.translation, dirs, meta, labels_flat != 0, cover_range(cam.translation, meta)
    )
    safe = np.maximum(hit, 0)
    classes = np.where(hit >= 0, labels_flat[safe], 0).astype(np.uint8)
    instances = np.where(hit >= 0, ids_flat[safe], 0).astype(np.uint32)
    h, w = cam.height, cam.width
    return RenderedView(w, h, classes.reshape(h, w), instances.reshape(h, w), depth.reshape(h, w))


def instance_mask(view: RenderedView, instance_id: int) -> Mask2D:
    """Pixels whose first hit belongs to the given instance (all-false when the
    id never appears)."""
    if instance_id < 1:
        raise ValueError(f"instance id must be >= 1, got {instance_id}")
    return Mask2D(view.width, view.height, view.instance_ids == instance_id)


# ---------------------------------------------------------------------------
# File formats: PGM masks, view JSON, scene bundles
# ---------------------------------------------------------------------------


def mask_to_pgm(mask: Mask2D) -> bytes:
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    return header + (mask.flags.astype(np.uint8) * 255).tobytes()


def save_mask_pgm(mask: Mask2D, path) -> None:
    with open(path, "wb") as f:
        f.write(mask_to_pgm(mask))


def load_mask_pgm(path) -> Mask2D:
    with open(path, "rb") as f:
        data = f.read()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    payload = data[m.end() :]
    if len(payload) != width * height:
        raise ValueError(f"{path}: pixel payload is {len(payload)} bytes, expected {width * height}")
    values = np.frombuffer(payload, dtype=np.uint8)
    if not np.all((values == 0) | (values == 255)):
        raise ValueError(f"{path}: mask pixels must be 0 or 255")
    return Mask2D(width, height, (values == 255).reshape(height, width))


def view_to_json(view: RenderedView) -> bytes:
    depth = [
        (float(d) if np.isfinite(d) else None) for d in view.depth.reshape(-1)
    ]
    payload = {
        "width": view.width,
        "height": view.height,
        "class": [int(c) for c in view.class_ids.reshape(-1)],
        "instance": [int(i) for i in view.instance_ids.reshape(-1)],
        "depth": depth,
    }
    return (json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def save_view(view: RenderedView, path) -> None:
    with open(path, "wb") as f:
        f.write(view_to_json(view))


def load_view(path) -> RenderedView:
    with open(path, "rb") as f:
        raw = json.load(f)
    w, h = int(raw["width"]), int(raw["height"])
    cls = np.asarray(raw["class"], dtype=np.uint8).reshape(h, w)
    ids = np.asarray(raw["instance"], dtype=np.uint32).reshape(h, w)
    depth = np.asarray(
        [np.inf if d is None else float(d) for d in raw["depth"]], dtype=np.float64
    ).reshape(h, w)
    return RenderedView(w, h, cls, ids, depth)


def spec_to_json(spec: SceneSpec) -> bytes:
    payload = {
        "seed": spec.seed,
        "dims": list(spec.meta.dims),
        "voxel_size": spec.meta.voxel_size,
        "origin": list(spec.meta.origin),
        "object_count": spec.object_count,
        "class_pool": list(spec.class_pool),
        "size_range": [list(r) for r in spec.size_range],
        "include_room_shell": spec.include_room_shell,
    }
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


def load_scene_spec(path) -> SceneSpec:
    with open(path, "rb") as f:
        raw = json.load(f)
    meta = GridMeta(tuple(raw["dims"]), raw["voxel_size"], tuple(raw["origin"]))
    return SceneSpec(
        raw["seed"],
        meta,
        raw["object_count"],
        tuple(raw["class_pool"]),
        tuple(tuple(r) for r in raw["size_range"]),
        raw["include_room_shell"],
    )


def save_bundle(scene: Scene, spec: SceneSpec, out_dir, view: RenderedView | None = None) -> None:
    """Write sem.ogrd, instances.ogrd, camera.json, spec.json and, when a view
    is supplied, view.json plus one PGM mask per instance."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_grid(scene.sem, out / "sem.ogrd")
    save_instance_map(scene.gt_instances, out / "instances.ogrd")
    save_camera(scene.camera, out / "camera.json")
    with open(out / "spec.json", "wb") as f:
        f.write(spec_to_json(spec))
    if view is not None:
        save_view(view, out / "view.json")
        for rec in scene.gt_instances.instances:
            save_mask_pgm(instance_mask(view, rec.id), out / f"mask_{rec.id:03d}.pgm")


def load_bundle(bundle_dir) -> tuple[Scene, SceneSpec]:
    d = Path(bundle_dir)
    sem = load_grid(d / "sem.ogrd")
    inst = load_instance_map(d / "instances.ogrd")
    camera = load_camera(d / "camera.json")
    spec = load_scene_spec(d / "spec.json")
    if inst.meta != sem.meta:
        raise ValueError("bundle instance map and semantic grid disagree on grid meta")
    return Scene(sem, inst, camera), spec
