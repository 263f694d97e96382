"""Dense voxel grid containers, coordinate conversions, and the .ogrd binary format.

Voxels are addressed by integer indices (i, j, k). The linear index of a voxel
is ``(k * ny + j) * nx + i`` (x fastest), and every payload on disk is laid out
in that order. In memory, volumes are numpy arrays of shape (nx, ny, nz)
indexed ``vol[i, j, k]``; helpers below convert between the two layouts.

All containers are frozen after construction (arrays are made read-only), so
they are safe to share across threads.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"OGRD"
FORMAT_VERSION = 1

KIND_LABELS = 1
KIND_AFFINITY = 2
KIND_INSTANCE = 3
KIND_MASK = 4

# Hard cap on cell count so a corrupt header cannot trigger a huge allocation.
MAX_CELLS = 1 << 28

# Class id 0 is reserved for "empty"; the three ids after it are the default
# background classes used by grounding.
DEFAULT_CLASS_TABLE = (
    "empty",
    "ceiling",
    "floor",
    "wall",
    "window",
    "door",
    "chair",
    "table",
    "sofa",
    "bed",
    "shelf",
    "lamp",
    "monitor",
)
DEFAULT_BACKGROUND_NAMES = ("ceiling", "floor", "wall")


class GridFormatError(ValueError):
    """A grid file is malformed (bad magic, version, kind, or payload layout)."""


class GridSizeError(ValueError):
    """Grid dimensions exceed what this toolkit is willing to allocate."""


class DimensionMismatchError(ValueError):
    """Two grid objects that must share a GridMeta do not."""


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class GridMeta:
    """Placement of a dense voxel grid in metric space.

    ``origin`` is the world-space minimum corner of voxel (0, 0, 0); voxels are
    uniform cubes of edge ``voxel_size`` meters. Float fields are coerced to
    float32 precision at construction so that save/load round trips are exact.
    """

    dims: tuple[int, int, int]
    voxel_size: float
    origin: tuple[float, float, float]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims!r}")
        ncells = dims[0] * dims[1] * dims[2]
        if ncells > MAX_CELLS:
            raise GridSizeError(f"grid of {ncells} cells exceeds the {MAX_CELLS} cell cap")
        vs = _f32(self.voxel_size)
        if not (vs > 0.0 and np.isfinite(vs)):
            raise ValueError(f"voxel_size must be positive and finite, got {self.voxel_size!r}")
        origin = tuple(_f32(c) for c in self.origin)
        if len(origin) != 3 or not all(np.isfinite(c) for c in origin):
            raise ValueError(f"origin must be three finite floats, got {self.origin!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "voxel_size", vs)
        object.__setattr__(self, "origin", origin)

    @property
    def ncells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def world_extent(self) -> np.ndarray:
        """Edge lengths of the grid's world-space bounding box, in meters."""
        return np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    def world_center(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=np.float64) + 0.5 * self.world_extent()

    def diagonal(self) -> float:
        """Length of the grid's world-space diagonal, in meters."""
        return float(np.linalg.norm(self.world_extent()))

    def contains_index(self, ijk) -> bool:
        i, j, k = ijk
        nx, ny, nz = self.dims
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz


def flatten_index(ijk, dims) -> int:
    """Linear index of voxel (i, j, k): ``(k * ny + j) * nx + i``."""
    i, j, k = ijk
    nx, ny, _ = dims
    return (k * ny + j) * nx + i


def unflatten_index(lin: int, dims) -> tuple[int, int, int]:
    nx, ny, _ = dims
    i = lin % nx
    rest = lin // nx
    return (i, rest % ny, rest // ny)


def linear_indices(ijk_array: np.ndarray, dims) -> np.ndarray:
    """Vectorized flatten_index over an (N, 3) index array."""
    nx, ny, _ = dims
    a = np.asarray(ijk_array)
    return (a[..., 2] * ny + a[..., 1]) * nx + a[..., 0]


def world_to_voxel(p, meta: GridMeta) -> tuple[int, int, int] | None:
    """Voxel containing world point ``p``, or None when outside the grid.

    Floor semantics: a coordinate exactly on an interior face belongs to the
    higher-index voxel; the max corner of the grid is outside.
    """
    p = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"world point must be finite, got {p!r}")
    rel = (p - np.asarray(meta.origin, dtype=np.float64)) / meta.voxel_size
    idx = np.floor(rel)
    if np.any(idx < 0) or np.any(idx >= np.asarray(meta.dims)):
        return None
    return (int(idx[0]), int(idx[1]), int(idx[2]))


def voxel_to_world(ijk, meta: GridMeta) -> np.ndarray:
    """World coordinates of the center of voxel (i, j, k)."""
    if not meta.contains_index(ijk):
        raise ValueError(f"voxel index {tuple(ijk)} outside grid dims {meta.dims}")
    return np.asarray(meta.origin, dtype=np.float64) + (
        np.asarray(ijk, dtype=np.float64) + 0.5
    ) * meta.voxel_size


def volume_from_linear(flat: np.ndarray, dims, vector: bool = False) -> np.ndarray:
    """Reshape a linear-order payload into an (nx, ny, nz[, 3]) volume."""
    nx, ny, nz = dims
    if vector:
        return flat.reshape(nz, ny, nx, 3).transpose(2, 1, 0, 3)
    return flat.reshape(nz, ny, nx).transpose(2, 1, 0)


def volume_to_linear(vol: np.ndarray) -> np.ndarray:
    """Flatten an (nx, ny, nz[, 3]) volume into spec linear order."""
    if vol.ndim == 4:
        return np.ascontiguousarray(vol.transpose(2, 1, 0, 3)).reshape(-1, 3)
    return np.ascontiguousarray(vol.transpose(2, 1, 0)).reshape(-1)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SemanticGrid:
    """Per-voxel class labels (uint8, 0 = empty) plus the class-name table."""

    meta: GridMeta
    labels: np.ndarray  # (nx, ny, nz) uint8
    class_table: tuple[str, ...] = DEFAULT_CLASS_TABLE

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.shape != self.meta.dims:
            raise ValueError(f"labels shape {labels.shape} != dims {self.meta.dims}")
        table = tuple(str(n) for n in self.class_table)
        if not table or table[0] != "empty":
            raise ValueError("class_table[0] must be the reserved name 'empty'")
        if len(set(table)) != len(table):
            raise ValueError("class names must be unique")
        if len(table) > 256:
            raise ValueError("class table cannot exceed 256 entries (8-bit labels)")
        if labels.size and int(labels.max()) >= len(table):
            raise ValueError(
                f"label {int(labels.max())} out of range for class table of {len(table)}"
            )
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "class_table", table)

    def class_id(self, name: str) -> int:
        try:
            return self.class_table.index(name)
        except ValueError:
            raise KeyError(f"unknown class name {name!r}") from None

    def __eq__(self, other):
        return (
            isinstance(other, SemanticGrid)
            and self.meta == other.meta
            and self.class_table == other.class_table
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class AffinityField:
    """Per-voxel 3-vector in continuous voxel-index units: position minus
    the owning instance's center (zero at empty voxels for derived fields)."""

    meta: GridMeta
    values: np.ndarray  # (nx, ny, nz, 3) float32

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.shape != self.meta.dims + (3,):
            raise ValueError(f"values shape {values.shape} != dims {self.meta.dims} + (3,)")
        if not np.all(np.isfinite(values)):
            raise ValueError("affinity components must all be finite")
        object.__setattr__(self, "values", _freeze(values))

    def __eq__(self, other):
        return (
            isinstance(other, AffinityField)
            and self.meta == other.meta
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class LossMask:
    """Per-voxel boolean excluding (False) voxels from the affinity loss."""

    meta: GridMeta
    flags: np.ndarray  # (nx, ny, nz) bool

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.shape != self.meta.dims:
            raise ValueError(f"flags shape {flags.shape} != dims {self.meta.dims}")
        object.__setattr__(self, "flags", _freeze(flags))

    def __eq__(self, other):
        return (
            isinstance(other, LossMask)
            and self.meta == other.meta
            and np.array_equal(self.flags, other.flags)
        )


@dataclass(frozen=True)
class InstanceRecord:
    id: int
    class_id: int
    center: tuple[float, float, float]  # continuous voxel-index units, float32 precision
    voxel_count: int

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(_f32(c) for c in self.center))


# Mean-vs-stored-center tolerance per component, in voxel-index units.
CENTER_TOL = 1e-5


@dataclass(frozen=True)
class InstanceMap:
    """Per-voxel instance ids (uint32, 0 = none) plus per-instance summaries.

    Ids are contiguous 1..N; each record's center is the arithmetic mean of its
    member voxel indices. Class purity of members is guaranteed for maps
    derived from connected components, but is not enforced here: clustering a
    noisy affinity field may legitimately produce mixed-class groups, which
    carry their majority class.
    """

    meta: GridMeta
    ids: np.ndarray  # (nx, ny, nz) uint32
    instances: tuple[InstanceRecord, ...]

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.uint32)
        if ids.shape != self.meta.dims:
            raise ValueError(f"ids shape {ids.shape} != dims {self.meta.dims}")
        records = tuple(self.instances)
        n = len(records)
        if [r.id for r in records] != list(range(1, n + 1)):
            raise ValueError("instance records must carry contiguous ids 1..N in order")
        counts = np.bincount(ids.reshape(-1), minlength=n + 1)
        if ids.size and int(ids.max()) > n:
            raise ValueError(f"voxel id {int(ids.max())} has no instance record")
        for r in records:
            if counts[r.id] != r.voxel_count:
                raise ValueError(
                    f"instance {r.id}: voxel_count {r.voxel_count} != {int(counts[r.id])} cells"
                )
            if r.voxel_count < 1:
                raise ValueError(f"instance {r.id} has no member voxels")
        if n:
            flat = ids.reshape(-1)
            occupied = np.flatnonzero(flat)
            member_ids = flat[occupied]
            coords = np.stack(np.unravel_index(occupied, ids.shape), axis=1).astype(np.float64)
            sums = np.zeros((n + 1, 3))
            np.add.at(sums, member_ids, coords)
            means = sums[1:] / counts[1:, None]
            stored = np.asarray([r.center for r in records], dtype=np.float64)
            if not np.allclose(stored, means, rtol=0.0, atol=CENTER_TOL):
                worst = int(np.argmax(np.abs(stored - means).max(axis=1))) + 1
                raise ValueError(f"instance {worst}: stored center deviates from member mean")
        object.__setattr__(self, "ids", _freeze(ids))
        object.__setattr__(self, "instances", records)

    def __eq__(self, other):
        return (
            isinstance(other, InstanceMap)
            and self.meta == other.meta
            and self.instances == other.instances
            and np.array_equal(self.ids, other.ids)
        )


def require_same_meta(*metas: GridMeta) -> GridMeta:
    first = metas[0]
    for m in metas[1:]:
        if m != first:
            raise DimensionMismatchError(f"grid metas differ: {first} vs {m}")
    return first


# ---------------------------------------------------------------------------
# .ogrd binary format
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sBBH3If3f")  # magic, version, kind, reserved, dims, vs, origin


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise GridFormatError(f"payload shorter than header promises (reading {what})")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def done(self):
        if self.pos != len(self.data):
            raise GridFormatError(f"{len(self.data) - self.pos} trailing bytes after payload")


def _read_header(r: _Reader, expect_kind: int) -> GridMeta:
    raw = r.take(_HEADER.size, "header")
    magic, version, kind, reserved, nx, ny, nz, vs, ox, oy, oz = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise GridFormatError("bad magic")
    if version != FORMAT_VERSION:
        raise GridFormatError(f"unsupported version {version}")
    if reserved != 0:
        raise GridFormatError("reserved bytes nonzero")
    if kind != expect_kind:
        raise GridFormatError(f"payload kind {kind}, expected {expect_kind}")
    if min(nx, ny, nz) < 1:
        raise GridFormatError(f"bad dims ({nx}, {ny}, {nz})")
    if nx * ny * nz > MAX_CELLS:
        raise GridSizeError(f"dims ({nx}, {ny}, {nz}) overflow the {MAX_CELLS} cell cap")
    if not (vs > 0.0 and np.isfinite(vs)):
        raise GridFormatError(f"bad voxel_size {vs}")
    if not all(np.isfinite(c) for c in (ox, oy, oz)):
        raise GridFormatError("non-finite origin")
    return GridMeta((nx, ny, nz), vs, (ox, oy, oz))


def _header_bytes(meta: GridMeta, kind: int) -> bytes:
    nx, ny, nz = meta.dims
    return _HEADER.pack(MAGIC, FORMAT_VERSION, kind, 0, nx, ny, nz, meta.voxel_size, *meta.origin)


def save_grid(grid: SemanticGrid, path) -> None:
    parts = [_header_bytes(grid.meta, KIND_LABELS)]
    parts.append(struct.pack("<H", len(grid.class_table)))
    for name in grid.class_table:
        enc = name.encode("utf-8")
        if len(enc) > 0xFFFF:
            raise ValueError(f"class name too long: {name[:32]!r}...")
        parts.append(struct.pack("<H", len(enc)))
        parts.append(enc)
    parts.append(volume_to_linear(grid.labels).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_grid(path) -> SemanticGrid:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    meta = _read_header(r, KIND_LABELS)
    (count,) = struct.unpack("<H", r.take(2, "class table count"))
    if count < 1:
        raise GridFormatError("class table must hold at least the 'empty' entry")
    names = []
    for idx in range(count):
        (ln,) = struct.unpack("<H", r.take(2, f"class table entry {idx} length"))
        raw = r.take(ln, f"class table entry {idx}")
        try:
            names.append(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise GridFormatError(f"class table entry {idx} is not valid UTF-8") from e
    flat = np.frombuffer(r.take(meta.ncells, "label payload"), dtype=np.uint8)
    r.done()
    try:
        return SemanticGrid(meta, volume_from_linear(flat, meta.dims), tuple(names))
    except ValueError as e:
        raise GridFormatError(str(e)) from e


def save_affinity(field: AffinityField, path) -> None:
    payload = volume_to_linear(field.values).astype("<f4").tobytes()
    with open(path, "wb") as f:
        f.write(_header_bytes(field.meta, KIND_AFFINITY) + payload)


def load_affinity(path) -> AffinityField:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    meta = _read_header(r, KIND_AFFINITY)
    flat = np.frombuffer(r.take(meta.ncells * 12, "affinity payload"), dtype="<f4").reshape(-1, 3)
    r.done()
    try:
        return AffinityField(meta, volume_from_linear(flat, meta.dims, vector=True))
    except ValueError as e:
        raise GridFormatError(str(e)) from e


def save_loss_mask(mask: LossMask, path) -> None:
    payload = volume_to_linear(mask.flags.astype(np.uint8)).tobytes()
    with open(path, "wb") as f:
        f.write(_header_bytes(mask.meta, KIND_MASK) + payload)


def load_loss_mask(path) -> LossMask:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    meta = _read_header(r, KIND_MASK)
    flat = np.frombuffer(r.take(meta.ncells, "mask payload"), dtype=np.uint8)
    r.done()
    if flat.size and int(flat.max()) > 1:
        raise GridFormatError("mask payload contains bytes other than 0 and 1")
    return LossMask(meta, volume_from_linear(flat, meta.dims).astype(bool))


_INSTANCE_RECORD = struct.Struct("<IB3fI")


def save_instance_map(inst: InstanceMap, path) -> None:
    parts = [_header_bytes(inst.meta, KIND_INSTANCE)]
    parts.append(volume_to_linear(inst.ids).astype("<u4").tobytes())
    parts.append(struct.pack("<I", len(inst.instances)))
    for rec in inst.instances:
        parts.append(
            _INSTANCE_RECORD.pack(rec.id, rec.class_id, *rec.center, rec.voxel_count)
        )
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_instance_map(path) -> InstanceMap:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    meta = _read_header(r, KIND_INSTANCE)
    flat = np.frombuffer(r.take(meta.ncells * 4, "instance id payload"), dtype="<u4")
    (count,) = struct.unpack("<I", r.take(4, "instance count"))
    records = []
    for idx in range(count):
        rid, cls, cx, cy, cz, nvox = _INSTANCE_RECORD.unpack(
            r.take(_INSTANCE_RECORD.size, f"instance record {idx}")
        )
        records.append(InstanceRecord(rid, cls, (cx, cy, cz), nvox))
    r.done()
    try:
        return InstanceMap(meta, volume_from_linear(flat, meta.dims), tuple(records))
    except ValueError as e:
        raise GridFormatError(str(e)) from e
