#!/usr/bin/env python3
"""Build a scene with two boxes stacked along one view ray and show that
grounding the shared pixels returns the nearer (occluding) box."""
import argparse

import numpy as np

from occuground import (
    BackgroundList,
    DEFAULT_BACKGROUND_NAMES,
    DEFAULT_CLASS_TABLE,
    GridMeta,
    SemanticGrid,
    affinity_gt,
    default_camera,
    ground_mask,
    render_view,
    scene_from_grid,
)
from occuground.camera import cover_range, pixel_to_ray, traverse_grid
from occuground.grounding import Mask2D


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=5, help="box edge length in voxels")
    args = ap.parse_args()

    meta = GridMeta((64, 64, 32), 0.08, (0.0, 0.0, 0.0))
    cam = default_camera(meta)
    ray = pixel_to_ray(cam, (cam.cx, cam.cy))
    crossed = traverse_grid(ray, meta, cover_range(cam.translation, meta))
    near_lo = np.asarray(crossed[len(crossed) // 4]) - args.size // 2
    far_lo = np.asarray(crossed[3 * len(crossed) // 4]) - args.size // 2

    labels = np.zeros(meta.dims, dtype=np.uint8)
    labels[:, :, 0] = DEFAULT_CLASS_TABLE.index("floor")
    s = args.size
    labels[near_lo[0]:near_lo[0]+s, near_lo[1]:near_lo[1]+s, near_lo[2]:near_lo[2]+s] = 8
    labels[far_lo[0]:far_lo[0]+s, far_lo[1]:far_lo[1]+s, far_lo[2]:far_lo[2]+s] = 9
    scene = scene_from_grid(SemanticGrid(meta, labels), cam)
    view = render_view(scene)

    solo = np.zeros(meta.dims, dtype=np.uint8)
    solo[far_lo[0]:far_lo[0]+s, far_lo[1]:far_lo[1]+s, far_lo[2]:far_lo[2]+s] = 9
    far_sil = render_view(scene_from_grid(SemanticGrid(meta, solo), cam)).instance_ids != 0

    near_id = int(scene.gt_instances.ids[tuple(np.asarray(crossed[len(crossed) // 4]))])
    shared = Mask2D(view.width, view.height, (view.instance_ids == near_id) & far_sil)
    print(f"near box instance {near_id}; shared pixels: {shared.pixel_count()}")

    aff, _ = affinity_gt(scene.gt_instances)
    bg = BackgroundList.from_names(DEFAULT_BACKGROUND_NAMES, scene.sem.class_table)
    result = ground_mask(shared, cam, scene.sem, aff, bg)
    for i, cluster in enumerate(result.clusters, 1):
        marker = " <- selected" if cluster is result.selected else ""
        print(f"cluster {i}: class {scene.sem.class_table[cluster.class_id]:<8} "
              f"{len(cluster.voxels):>4} voxels, depth {cluster.depth:.3f} m{marker}")


if __name__ == "__main__":
    main()
