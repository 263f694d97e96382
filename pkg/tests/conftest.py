import numpy as np
import pytest

from occuground.grid import DEFAULT_BACKGROUND_NAMES, DEFAULT_CLASS_TABLE, GridMeta, SemanticGrid
from occuground.grounding import BackgroundList
from occuground.labeling import affinity_gt, connected_components
from occuground.synth import default_camera, default_scene_spec, generate_scene, scene_from_grid


@pytest.fixture(scope="session")
def default_meta():
    return GridMeta((64, 64, 32), 0.08, (0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def default_bg():
    return BackgroundList.from_names(DEFAULT_BACKGROUND_NAMES, DEFAULT_CLASS_TABLE)


@pytest.fixture(scope="session")
def seed7_scene():
    return generate_scene(default_scene_spec(7, 4))


@pytest.fixture(scope="session")
def seed7_affinity(seed7_scene):
    aff, mask = affinity_gt(connected_components(seed7_scene.sem, 26))
    return aff


def build_box_scene(boxes, meta=None, camera=None, shell=True):
    """Scene with hand-placed boxes: each box is ((i, j, k), (si, sj, sk), class_id)."""
    meta = meta or GridMeta((64, 64, 32), 0.08, (0.0, 0.0, 0.0))
    labels = np.zeros(meta.dims, dtype=np.uint8)
    if shell:
        labels[:, :, 0] = DEFAULT_CLASS_TABLE.index("floor")
        labels[0, :, :] = DEFAULT_CLASS_TABLE.index("wall")
        labels[:, 0, :] = DEFAULT_CLASS_TABLE.index("wall")
    for (i, j, k), (si, sj, sk), cls in boxes:
        labels[i : i + si, j : j + sj, k : k + sk] = cls
    sem = SemanticGrid(meta, labels, DEFAULT_CLASS_TABLE)
    return scene_from_grid(sem, camera or default_camera(meta))


def gt_voxel_set(scene, instance_id):
    return set(map(tuple, np.argwhere(scene.gt_instances.ids == instance_id)))


def voxel_iou(a, b):
    a, b = set(a), set(b)
    return len(a & b) / len(a | b) if (a or b) else 1.0
