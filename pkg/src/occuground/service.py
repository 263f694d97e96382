"""Read-only HTTP API over a loaded scene bundle.

Endpoints: GET /api/scene, GET /api/render, GET /api/instances, and
POST /api/ground. Grounding runs against the ground-truth affinity field
derived from the bundle's semantic grid with the default 26-neighbor stencil,
so responses are byte-identical to `og ground` fed the outputs of `og gt`.
All state is immutable after startup; requests never mutate the scene.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from pydantic import BaseModel, Field

from .cluster import ClusterParams
from .grid import DEFAULT_BACKGROUND_NAMES
from .grounding import BackgroundList, Mask2D, NoForegroundError, ground_mask, result_to_json
from .labeling import affinity_gt, connected_components
from .synth import load_bundle, render_view, view_to_json


class GroundRequest(BaseModel):
    pixels: list[tuple[int, int]] = Field(min_length=1)
    eps: float = 1.5
    min_pts: int = 4
    background: list[str] | None = None


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def build_app(bundle_dir) -> FastAPI:
    bundle_dir = Path(bundle_dir)
    scene, _spec = load_bundle(bundle_dir)
    view_path = bundle_dir / "view.json"
    if view_path.exists():
        view_bytes = view_path.read_bytes()
    else:
        view_bytes = view_to_json(render_view(scene))

    sem = scene.sem
    meta = sem.meta
    affinity, _ = affinity_gt(connected_components(sem, 26))

    occupied = np.argwhere(sem.labels != 0)
    order = np.argsort(
        (occupied[:, 2] * meta.dims[1] + occupied[:, 1]) * meta.dims[0] + occupied[:, 0],
        kind="stable",
    )
    occupied = occupied[order]
    classes = sem.labels[occupied[:, 0], occupied[:, 1], occupied[:, 2]]
    inst_ids = scene.gt_instances.ids[occupied[:, 0], occupied[:, 1], occupied[:, 2]]
    scene_bytes = _json_bytes(
        {
            "meta": {
                "dims": list(meta.dims),
                "voxel_size": meta.voxel_size,
                "origin": list(meta.origin),
            },
            "class_table": list(sem.class_table),
            "voxels": [
                [int(i), int(j), int(k), int(c), int(r)]
                for (i, j, k), c, r in zip(occupied, classes, inst_ids)
            ],
        }
    )

    cam_origin = scene.camera.translation
    instance_rows = []
    for rec in scene.gt_instances.instances:
        members = np.argwhere(scene.gt_instances.ids == rec.id).astype(np.float64)
        centers_w = np.asarray(meta.origin) + (members + 0.5) * meta.voxel_size
        depth = float(np.min(np.linalg.norm(centers_w - cam_origin, axis=1)))
        instance_rows.append(
            {
                "id": rec.id,
                "class": sem.class_table[rec.class_id],
                "center": [float(c) for c in rec.center],
                "voxel_count": rec.voxel_count,
                "depth": depth,
            }
        )
    instances_bytes = _json_bytes(instance_rows)

    app = FastAPI(title="occuground scene service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/scene")
    def api_scene():
        return Response(content=scene_bytes, media_type="application/json")

    @app.get("/api/render")
    def api_render():
        return Response(content=view_bytes, media_type="application/json")

    @app.get("/api/instances")
    def api_instances():
        return Response(content=instances_bytes, media_type="application/json")

    @app.post("/api/ground")
    def api_ground(req: GroundRequest):
        cam = scene.camera
        for u, v in req.pixels:
            if not (0 <= u < cam.width and 0 <= v < cam.height):
                raise HTTPException(400, f"pixel ({u}, {v}) outside image {cam.width}x{cam.height}")
        if not req.eps > 0:
            raise HTTPException(400, f"eps must be positive, got {req.eps}")
        if req.min_pts < 1:
            raise HTTPException(400, f"min_pts must be at least 1, got {req.min_pts}")
        names = DEFAULT_BACKGROUND_NAMES if req.background is None else req.background
        try:
            bg = BackgroundList.from_names(names, sem.class_table)
        except KeyError as e:
            raise HTTPException(400, str(e.args[0])) from None
        mask = Mask2D.from_pixels(cam.width, cam.height, req.pixels)
        params = ClusterParams(req.eps, req.min_pts)
        try:
            result = ground_mask(mask, cam, sem, affinity, bg, params)
        except NoForegroundError as e:
            result = e.result
        return Response(content=result_to_json(result, sem.class_table), media_type="application/json")

    return app
