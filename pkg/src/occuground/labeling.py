"""Instance ground truth from semantic grids: connected components per class,
geometry centers, affinity-field targets, and the masked regression loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import (
    AffinityField,
    GridMeta,
    InstanceMap,
    InstanceRecord,
    LossMask,
    SemanticGrid,
    linear_indices,
    require_same_meta,
)

CONNECTIVITIES = (6, 18, 26)

# scipy structuring-element rank per neighbor stencil: 6 = faces only,
# 18 = faces + edges, 26 = full 3x3x3 shell.
_CONN_RANK = {6: 1, 18: 2, 26: 3}


def check_connectivity(conn: int) -> int:
    if conn not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be one of {CONNECTIVITIES}, got {conn!r}")
    return conn


def instance_center(members) -> np.ndarray:
    """Componentwise mean of member voxel indices, in continuous voxel units."""
    members = np.asarray(members, dtype=np.float64)
    if members.size == 0:
        raise ValueError("instance_center requires at least one member voxel")
    return members.reshape(-1, 3).mean(axis=0)


def connected_components(grid: SemanticGrid, conn: int = 26) -> InstanceMap:
    """Group same-class voxels into instances under a 6/18/26 neighbor stencil.

    Components are computed independently per nonzero class, then numbered
    1..N by each component's smallest linear index so the result is
    reproducible regardless of class iteration order.
    """
    check_connectivity(conn)
    structure = ndimage.generate_binary_structure(3, _CONN_RANK[conn])
    labels = grid.labels
    components = []  # (min_linear, class_id, member_index_array)
    for cls in np.unique(labels):
        if cls == 0:
            continue
        comp, ncomp = ndimage.label(labels == cls, structure=structure)
        for c in range(1, ncomp + 1):
            members = np.argwhere(comp == c)
            lin = linear_indices(members, grid.meta.dims)
            components.append((int(lin.min()), int(cls), members))
    components.sort(key=lambda t: t[0])

    ids = np.zeros(grid.meta.dims, dtype=np.uint32)
    records = []
    for new_id, (_, cls, members) in enumerate(components, start=1):
        ids[members[:, 0], members[:, 1], members[:, 2]] = new_id
        center = instance_center(members)
        records.append(InstanceRecord(new_id, cls, tuple(center), len(members)))
    return InstanceMap(grid.meta, ids, tuple(records))


def affinity_gt(inst: InstanceMap) -> tuple[AffinityField, LossMask]:
    """Affinity target (voxel position minus its instance center) and the loss
    mask that is True exactly on instance-owning voxels."""
    ids = inst.ids
    values = np.zeros(inst.meta.dims + (3,), dtype=np.float64)
    if inst.instances:
        centers = np.zeros((len(inst.instances) + 1, 3))
        for rec in inst.instances:
            centers[rec.id] = rec.center
        occupied = ids > 0
        coords = np.argwhere(occupied).astype(np.float64)
        values[occupied] = coords - centers[ids[occupied]]
    return (
        AffinityField(inst.meta, values.astype(np.float32)),
        LossMask(inst.meta, ids > 0),
    )


@dataclass(frozen=True)
class AffinityEval:
    """Masked regression error; total_loss is set only when the occupancy loss
    and its weight were supplied."""

    mse: float
    masked_voxel_count: int
    total_loss: float | None = None


def masked_mse(pred: AffinityField, gt: AffinityField, mask: LossMask) -> AffinityEval:
    """Mean squared error over masked voxels, normalized by 3x(masked count).

    Zero masked voxels yield mse 0 by convention.
    """
    require_same_meta(pred.meta, gt.meta, mask.meta)
    count = int(np.count_nonzero(mask.flags))
    if count == 0:
        return AffinityEval(0.0, 0)
    diff = (
        pred.values[mask.flags].astype(np.float64)
        - gt.values[mask.flags].astype(np.float64)
    )
    return AffinityEval(float(np.sum(diff * diff) / (3.0 * count)), count)


def total_loss(l_ori: float, l_aff: float, lam: float = 1.0) -> float:
    """Combined objective: occupancy loss plus weighted affinity loss."""
    if not (np.isfinite(l_ori) and np.isfinite(l_aff) and np.isfinite(lam)):
        raise ValueError("loss terms and weight must be finite")
    if lam < 0:
        raise ValueError(f"loss weight must be non-negative, got {lam}")
    return float(l_ori + lam * l_aff)
