"""The `og` command line: synthesize scenes, derive instance ground truth,
evaluate affinity predictions, ground masks, segment grids, and serve a scene.

Exit codes: 0 success; 1 usage error; 2 I/O or format error; 3 empty-result
conditions (no groundable foreground, or scene placement failure). Outputs are
written to temporaries and renamed in, so a failing command leaves no partial
files behind.
"""
from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path

from .camera import load_camera
from .cluster import ClusterParams
from .grid import (
    DEFAULT_BACKGROUND_NAMES,
    DimensionMismatchError,
    GridFormatError,
    GridSizeError,
    load_affinity,
    load_grid,
    load_loss_mask,
    save_affinity,
    save_grid,
    save_instance_map,
    save_loss_mask,
)
from .grounding import BackgroundList, NoForegroundError, ground_mask, instance_segment, result_to_json
from .labeling import CONNECTIVITIES, affinity_gt, connected_components, masked_mse, total_loss
from .synth import (
    DEFAULT_DIMS,
    PlacementFailure,
    default_scene_spec,
    generate_scene,
    load_bundle,
    load_mask_pgm,
    render_view,
    save_bundle,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_EMPTY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports bad flags as exit code 1, not 2."""

    def error(self, message):
        raise UsageError(message)


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError(f"--dims expects X,Y,Z, got {text!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--dims expects integers, got {text!r}") from None
    if any(d < 1 for d in dims):
        raise UsageError(f"--dims must be positive, got {text!r}")
    return dims


def _cluster_params(args) -> ClusterParams:
    if not args.eps > 0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    if args.min_pts < 1:
        raise UsageError(f"--min-pts must be at least 1, got {args.min_pts}")
    return ClusterParams(args.eps, args.min_pts)


def _background(args, class_table) -> BackgroundList:
    names = [n for n in args.background.split(",") if n]
    try:
        return BackgroundList.from_names(names, class_table)
    except KeyError as e:
        raise UsageError(str(e.args[0])) from None


def _commit_outputs(outputs) -> None:
    """Write every (save_fn, final_path) to a temporary first, then rename all,
    so either every output lands or none does."""
    tmps = []
    try:
        for save_fn, final in outputs:
            final = Path(final)
            tmp = final.with_name(final.name + ".tmp")
            save_fn(tmp)
            tmps.append((tmp, final))
    except BaseException:
        for tmp, _ in tmps:
            tmp.unlink(missing_ok=True)
        raise
    for tmp, final in tmps:
        os.replace(tmp, final)


def cmd_synth(args) -> int:
    dims = _parse_dims(args.dims)
    spec = default_scene_spec(args.seed, args.objects, dims)
    try:
        scene = generate_scene(spec)
    except PlacementFailure as e:
        print(f"og synth: {e}", file=sys.stderr)
        return EXIT_EMPTY
    view = render_view(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(scene, spec, out, view)
    print(
        f"og synth: wrote bundle with {len(scene.gt_instances.instances)} instances to {out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_gt(args) -> int:
    grid = load_grid(args.grid)
    inst = connected_components(grid, args.connectivity)
    aff, mask = affinity_gt(inst)
    _commit_outputs(
        [
            (lambda p: save_instance_map(inst, p), args.out_instances),
            (lambda p: save_affinity(aff, p), args.out_affinity),
            (lambda p: save_loss_mask(mask, p), args.out_mask),
        ]
    )
    print(f"og gt: {len(inst.instances)} instances", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = load_affinity(args.pred)
    gt = load_affinity(args.gt)
    mask = load_loss_mask(args.mask)
    result = masked_mse(pred, gt, mask)
    payload = {"mse": result.mse, "masked_voxels": result.masked_voxel_count}
    if args.l_ori is not None:
        payload["total_loss"] = total_loss(args.l_ori, result.mse, args.lam)
    print(json.dumps(payload))
    return EXIT_OK


def cmd_ground(args) -> int:
    sem = load_grid(args.grid)
    aff = load_affinity(args.affinity)
    cam = load_camera(args.camera)
    mask = load_mask_pgm(args.mask)
    if (mask.width, mask.height) != (cam.width, cam.height):
        raise UsageError(
            f"mask is {mask.width}x{mask.height} but camera image is {cam.width}x{cam.height}"
        )
    bg = _background(args, sem.class_table)
    params = _cluster_params(args)
    try:
        result = ground_mask(mask, cam, sem, aff, bg, params)
    except NoForegroundError as e:
        result = e.result
        print("og ground: no groundable foreground under the mask", file=sys.stderr)
    payload = result_to_json(result, sem.class_table)
    _commit_outputs([(lambda p: Path(p).write_bytes(payload), args.out)])
    if result.selected is None:
        return EXIT_EMPTY
    print(
        f"og ground: selected {len(result.selected.voxels)} voxels "
        f"of class {sem.class_table[result.selected.class_id]!r} "
        f"at depth {result.selected.depth:.3f} m",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_segment(args) -> int:
    sem = load_grid(args.grid)
    aff = load_affinity(args.affinity)
    bg = _background(args, sem.class_table)
    params = _cluster_params(args)
    inst = instance_segment(sem, aff, bg, params)
    _commit_outputs([(lambda p: save_instance_map(inst, p), args.out)])
    print(f"og segment: {len(inst.instances)} instances", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import service

    try:
        app = service.build_app(args.scene)
    except FileNotFoundError as e:
        print(f"og serve: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
        probe.close()
    except OSError as e:
        print(f"og serve: cannot bind {args.host}:{args.port}: {e}", file=sys.stderr)
        return EXIT_IO

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="og", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene bundle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--objects", type=int, required=True)
    p.add_argument("--dims", default=",".join(str(d) for d in DEFAULT_DIMS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gt", help="derive instance/affinity/mask ground truth")
    p.add_argument("--grid", required=True)
    p.add_argument("--connectivity", type=int, default=26, choices=CONNECTIVITIES)
    p.add_argument("--out-instances", required=True)
    p.add_argument("--out-affinity", required=True)
    p.add_argument("--out-mask", required=True)
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("eval", help="masked MSE of a predicted affinity field")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--l-ori", type=float, default=None, dest="l_ori")
    p.add_argument("--lambda", type=float, default=1.0, dest="lam")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ground", help="ground a 2D mask to a 3D instance")
    p.add_argument("--grid", required=True)
    p.add_argument("--affinity", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--camera", required=True)
    p.add_argument("--eps", type=float, default=1.5)
    p.add_argument("--min-pts", type=int, default=4, dest="min_pts")
    p.add_argument("--background", default=",".join(DEFAULT_BACKGROUND_NAMES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("segment", help="full-grid instance segmentation")
    p.add_argument("--grid", required=True)
    p.add_argument("--affinity", required=True)
    p.add_argument("--eps", type=float, default=1.5)
    p.add_argument("--min-pts", type=int, default=4, dest="min_pts")
    p.add_argument("--background", default=",".join(DEFAULT_BACKGROUND_NAMES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("serve", help="serve a scene bundle over HTTP")
    p.add_argument("--scene", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"og: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (
        GridFormatError,
        GridSizeError,
        DimensionMismatchError,
        FileNotFoundError,
        IsADirectoryError,
        PermissionError,
        json.JSONDecodeError,
        UnicodeDecodeError,
        ValueError,
    ) as e:
        print(f"og: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
