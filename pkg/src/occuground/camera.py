"""Pinhole camera model, pixel-to-ray conversion, and voxel grid traversal.

Camera convention: +z forward, +x right, +y down; pixel (u, v) of a raster
image casts through the continuous coordinate (u + 0.5, v + 0.5).

The scalar traversal (`traverse_grid`) and the batched first-hit traversal
(`batch_first_hit`) implement the same incremental face-stepping recurrence
with identical arithmetic, so a pixel rendered by the batch path re-traverses
to the same voxel sequence.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .grid import GridMeta

# Entry lengths shorter than this are treated as zero-length boundary grazes.
BOUNDARY_TOL = 1e-9

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray  # (3, 3) camera-to-world
    translation: np.ndarray  # (3,) camera origin in world space, meters

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be at least 1x1, got {self.width}x{self.height}")
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3) or trans.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(rot) < 0:
            raise ValueError("rotation must be proper (det +1), got a reflection")
        rot = rot.copy()
        trans = trans.copy()
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "fx", float(self.fx))
        object.__setattr__(self, "fy", float(self.fy))
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def cam_to_world(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, fx, fy, cx, cy, width, height, cam_to_world) -> "PinholeCamera":
        m = np.asarray(cam_to_world, dtype=np.float64).reshape(4, 4)
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), atol=1e-9, rtol=0.0):
            raise ValueError(f"cam_to_world bottom row must be 0,0,0,1, got {m[3].tolist()}")
        return cls(fx, fy, cx, cy, width, height, m[:3, :3], m[:3, 3])


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray  # (3,) meters
    dir: np.ndarray  # (3,) unit vector

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).copy()
        d = np.asarray(self.dir, dtype=np.float64).copy()
        if o.shape != (3,) or d.shape != (3,):
            raise ValueError("ray origin and direction must be 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d|={np.linalg.norm(d)}")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "dir", d)


def _rotate_dirs(rotation: np.ndarray, x, y, z):
    """Apply a rotation to camera-frame directions with explicit componentwise
    sums, so scalar and batched callers produce bit-identical results."""
    r = rotation
    wx = r[0, 0] * x + r[0, 1] * y + r[0, 2] * z
    wy = r[1, 0] * x + r[1, 1] * y + r[1, 2] * z
    wz = r[2, 0] * x + r[2, 1] * y + r[2, 2] * z
    return wx, wy, wz


def pixel_to_ray(cam: PinholeCamera, pixel) -> Ray:
    """World-space ray through a continuous pixel coordinate."""
    u, v = float(pixel[0]), float(pixel[1])
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        raise ValueError(f"pixel ({u}, {v}) outside image {cam.width}x{cam.height}")
    x = (u - cam.cx) / cam.fx
    y = (v - cam.cy) / cam.fy
    n = math.sqrt(x * x + y * y + 1.0)
    wx, wy, wz = _rotate_dirs(cam.rotation, x / n, y / n, 1.0 / n)
    return Ray(cam.translation, np.array([wx, wy, wz]))


def project_point(cam: PinholeCamera, p) -> tuple[float, float, float] | None:
    """Project a world point to (u, v, depth); None when behind the camera or
    out of frame."""
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point must be finite, got {p!r}")
    p_cam = cam.rotation.T @ (p - cam.translation)
    z = p_cam[2]
    if z <= 1e-9:
        return None
    u = cam.fx * p_cam[0] / z + cam.cx
    v = cam.fy * p_cam[1] / z + cam.cy
    if not (0.0 <= u < cam.width and 0.0 <= v < cam.height):
        return None
    return (float(u), float(v), float(z))


def pixel_rays(cam: PinholeCamera) -> np.ndarray:
    """Unit world directions for every raster pixel center, shape (h*w, 3),
    row-major. All rays share the camera origin, and each direction is
    bit-identical to ``pixel_to_ray`` at the same pixel center."""
    us = np.arange(cam.width, dtype=np.float64) + 0.5
    vs = np.arange(cam.height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(us, vs)
    x = (uu - cam.cx) / cam.fx
    y = (vv - cam.cy) / cam.fy
    n = np.sqrt(x * x + y * y + 1.0)
    wx, wy, wz = _rotate_dirs(cam.rotation, x / n, y / n, np.float64(1.0) / n)
    return np.stack([wx, wy, wz], axis=-1).reshape(-1, 3)


def cover_range(origin, meta: GridMeta) -> float:
    """A ray length from ``origin`` guaranteed to reach past the entire grid."""
    lo = np.asarray(meta.origin, dtype=np.float64)
    hi = lo + meta.world_extent()
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    far = float(np.max(np.linalg.norm(corners - np.asarray(origin, dtype=np.float64), axis=1)))
    return far + meta.voxel_size


def _slab_entry_exit(o: float, d: float, lo: float, hi: float) -> tuple[float, float]:
    if d == 0.0:
        if lo <= o <= hi:
            return (-math.inf, math.inf)
        return (math.inf, -math.inf)
    t1 = (lo - o) / d
    t2 = (hi - o) / d
    return (min(t1, t2), max(t1, t2))


def traverse_entries(
    ray: Ray, meta: GridMeta, max_range: float | None = None
) -> list[tuple[tuple[int, int, int], float]]:
    """Voxels crossed by the ray segment, with the entry distance of each.

    Voxels appear in increasing entry order with positive crossing length;
    consecutive voxels share a face. ``max_range`` defaults to the grid
    diagonal.
    """
    if max_range is None:
        max_range = meta.diagonal()
    if not max_range > 0:
        raise ValueError(f"max_range must be positive, got {max_range}")
    o = ray.origin
    d = ray.dir
    lo = np.asarray(meta.origin, dtype=np.float64)
    hi = lo + meta.world_extent()
    vs = meta.voxel_size
    dims = meta.dims

    t_enter = 0.0
    t_end = float(max_range)
    for a in range(3):
        tmin, tmax = _slab_entry_exit(float(o[a]), float(d[a]), float(lo[a]), float(hi[a]))
        t_enter = max(t_enter, tmin)
        t_end = min(t_end, tmax)
    if t_end - t_enter <= BOUNDARY_TOL:
        return []

    idx = [0, 0, 0]
    step = [0, 0, 0]
    t_max = [math.inf, math.inf, math.inf]
    t_delta = [math.inf, math.inf, math.inf]
    for a in range(3):
        pa = float(o[a]) + t_enter * float(d[a])
        ia = int(math.floor((pa - float(lo[a])) / vs))
        idx[a] = min(max(ia, 0), dims[a] - 1)
        da = float(d[a])
        if da > 0.0:
            step[a] = 1
            t_max[a] = (float(lo[a]) + (idx[a] + 1) * vs - float(o[a])) / da
            t_delta[a] = vs / da
        elif da < 0.0:
            step[a] = -1
            t_max[a] = (float(lo[a]) + idx[a] * vs - float(o[a])) / da
            t_delta[a] = vs / -da

    out = [((idx[0], idx[1], idx[2]), t_enter)]
    while True:
        if t_max[0] <= t_max[1] and t_max[0] <= t_max[2]:
            axis = 0
        elif t_max[1] <= t_max[2]:
            axis = 1
        else:
            axis = 2
        t_next = t_max[axis]
        if t_end - t_next <= BOUNDARY_TOL:
            break
        idx[axis] += step[axis]
        if idx[axis] < 0 or idx[axis] >= dims[axis]:
            break
        t_max[axis] += t_delta[axis]
        out.append(((idx[0], idx[1], idx[2]), t_next))
    return out


def traverse_grid(
    ray: Ray, meta: GridMeta, max_range: float | None = None
) -> list[tuple[int, int, int]]:
    """Ordered voxels crossed by the ray segment (see traverse_entries)."""
    return [ijk for ijk, _ in traverse_entries(ray, meta, max_range)]


def batch_first_hit(
    origin: np.ndarray,
    dirs: np.ndarray,
    meta: GridMeta,
    occupied_flat: np.ndarray,
    max_range: float,
) -> tuple[np.ndarray, np.ndarray]:
    """First occupied voxel along many same-origin rays.

    ``occupied_flat`` is a boolean array over linear voxel indices. Returns
    (hit, depth): ``hit`` holds the linear index of the first occupied voxel
    or -1 for a miss, ``depth`` the ray distance at which that voxel was
    entered (+inf for misses). Steps all rays with the same arithmetic as
    ``traverse_entries``, so results match a per-pixel scalar re-traversal.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    n = dirs.shape[0]
    o = np.asarray(origin, dtype=np.float64)
    lo = np.asarray(meta.origin, dtype=np.float64)
    hi = lo + meta.world_extent()
    vs = meta.voxel_size
    dims = np.asarray(meta.dims)

    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / dirs
        t2 = (hi - o) / dirs
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    zero = dirs == 0.0
    inside = (lo <= o) & (o <= hi)
    tmin = np.where(zero, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(zero, np.where(inside, np.inf, -np.inf), tmax)
    t_enter = np.maximum(tmin.max(axis=1), 0.0)
    t_end = np.minimum(tmax.min(axis=1), max_range)

    hit = np.full(n, -1, dtype=np.int64)
    depth = np.full(n, np.inf)
    active = (t_end - t_enter) > BOUNDARY_TOL
    if not active.any():
        return hit, depth

    p = o + t_enter[:, None] * dirs
    idx = np.clip(np.floor((p - lo) / vs).astype(np.int64), 0, dims - 1)
    step = np.sign(dirs).astype(np.int64)
    with np.errstate(divide="ignore"):
        next_boundary = lo + (idx + (step > 0)) * vs
        t_max = np.where(zero, np.inf, (next_boundary - o) / dirs)
        t_delta = np.where(zero, np.inf, vs / np.abs(dirs))

    nx, ny, _ = meta.dims
    t_cur = t_enter.copy()
    while active.any():
        act = np.flatnonzero(active)
        lin = (idx[act, 2] * ny + idx[act, 1]) * nx + idx[act, 0]
        found = occupied_flat[lin]
        if found.any():
            got = act[found]
            hit[got] = lin[found]
            depth[got] = t_cur[got]
            active[got] = False
            act = act[~found]
            if act.size == 0:
                break
        axis = np.argmin(t_max[act], axis=1)
        t_next = t_max[act, axis]
        alive = (t_end[act] - t_next) > BOUNDARY_TOL
        active[act[~alive]] = False
        act, axis, t_next = act[alive], axis[alive], t_next[alive]
        idx[act, axis] += step[act, axis]
        outside = (idx[act, axis] < 0) | (idx[act, axis] >= dims[axis])
        if outside.any():
            active[act[outside]] = False
            act, axis, t_next = act[~outside], axis[~outside], t_next[~outside]
        t_max[act, axis] += t_delta[act, axis]
        t_cur[act] = t_next
    return hit, depth


# ---------------------------------------------------------------------------
# Camera JSON file format
# ---------------------------------------------------------------------------


def camera_to_json(cam: PinholeCamera) -> str:
    payload = {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "width": cam.width,
        "height": cam.height,
        "cam_to_world": [float(x) for x in cam.cam_to_world().reshape(-1)],
    }
    return json.dumps(payload, indent=2) + "\n"


def save_camera(cam: PinholeCamera, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(camera_to_json(cam))


def load_camera(path) -> PinholeCamera:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    missing = {"fx", "fy", "cx", "cy", "width", "height", "cam_to_world"} - set(raw)
    if missing:
        raise ValueError(f"camera file missing fields: {sorted(missing)}")
    m = np.asarray(raw["cam_to_world"], dtype=np.float64)
    if m.shape != (16,):
        raise ValueError(f"cam_to_world must hold 16 numbers, got {m.shape}")
    return PinholeCamera.from_matrix(
        raw["fx"], raw["fy"], raw["cx"], raw["cy"], raw["width"], raw["height"], m
    )
