"""Scene generation determinism, placement discipline, and rendering."""
import numpy as np
import pytest

from occuground.camera import cover_range, pixel_to_ray, traverse_entries
from occuground.grid import DEFAULT_CLASS_TABLE, GridMeta
from occuground.grounding import Mask2D
from occuground.synth import (
    PlacementFailure,
    SceneSpec,
    default_scene_spec,
    generate_scene,
    instance_mask,
    load_bundle,
    load_mask_pgm,
    load_scene_spec,
    load_view,
    mask_to_pgm,
    render_view,
    save_bundle,
    save_mask_pgm,
    save_view,
    spec_to_json,
)


def test_same_spec_gives_bit_identical_scenes():
    spec = default_scene_spec(11, 5)
    a = generate_scene(spec)
    b = generate_scene(spec)
    assert a.sem == b.sem
    assert a.gt_instances == b.gt_instances
    assert np.array_equal(a.camera.rotation, b.camera.rotation)
    assert np.array_equal(a.camera.translation, b.camera.translation)


def test_different_seeds_differ():
    a = generate_scene(default_scene_spec(1, 4))
    b = generate_scene(default_scene_spec(2, 4))
    assert a.sem != b.sem


def test_zero_objects_shell_only():
    scene = generate_scene(default_scene_spec(3, 0))
    assert scene.gt_instances.instances == ()
    present = set(np.unique(scene.sem.labels).tolist())
    floor = DEFAULT_CLASS_TABLE.index("floor")
    wall = DEFAULT_CLASS_TABLE.index("wall")
    assert present == {0, floor, wall}


@pytest.mark.parametrize("n", [1, 3, 8])
def test_object_count_matches_instances(n):
    scene = generate_scene(default_scene_spec(21 + n, n))
    assert len(scene.gt_instances.instances) == n


def test_boxes_keep_chebyshev_gap_of_two():
    scene = generate_scene(default_scene_spec(17, 8))
    inst = scene.gt_instances
    members = [np.argwhere(inst.ids == r.id) for r in inst.instances]
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            diff = np.abs(members[a][:, None, :] - members[b][None, :, :]).max(axis=2)
            assert diff.min() >= 2


def test_placement_failure_when_too_dense():
    meta = GridMeta((12, 12, 8), 0.08, (0.0, 0.0, 0.0))
    spec = SceneSpec(5, meta, 60, (5,), size_range=((3, 4), (3, 4), (3, 4)))
    with pytest.raises(PlacementFailure, match="placement failed"):
        generate_scene(spec)


def test_camera_sits_outside_the_grid():
    scene = generate_scene(default_scene_spec(9, 2))
    meta = scene.sem.meta
    lo = np.asarray(meta.origin)
    hi = lo + meta.world_extent()
    eye = scene.camera.translation
    assert np.any(eye < lo) or np.any(eye > hi)


def test_render_matches_scalar_retraversal(seed7_scene):
    scene = seed7_scene
    view = render_view(scene)
    cam = scene.camera
    meta = scene.sem.meta
    max_range = cover_range(cam.translation, meta)
    rng = np.random.default_rng(0)
    for _ in range(300):
        u = int(rng.integers(0, cam.width))
        v = int(rng.integers(0, cam.height))
        ray = pixel_to_ray(cam, (u + 0.5, v + 0.5))
        first = None
        for ijk, t in traverse_entries(ray, meta, max_range):
            if scene.sem.labels[ijk] != 0:
                first = (ijk, t)
                break
        if first is None:
            assert view.class_ids[v, u] == 0
            assert view.instance_ids[v, u] == 0
            assert not np.isfinite(view.depth[v, u])
        else:
            ijk, t = first
            assert view.class_ids[v, u] == scene.sem.labels[ijk]
            assert view.instance_ids[v, u] == scene.gt_instances.ids[ijk]
            assert view.depth[v, u] == t


def test_every_voxel_nearer_than_the_recorded_depth_is_empty(seed7_scene):
    view = render_view(seed7_scene)
    cam = seed7_scene.camera
    meta = seed7_scene.sem.meta
    max_range = cover_range(cam.translation, meta)
    rng = np.random.default_rng(1)
    hits = np.argwhere(view.class_ids != 0)
    for v, u in hits[rng.permutation(len(hits))[:150]]:
        ray = pixel_to_ray(cam, (u + 0.5, v + 0.5))
        for ijk, t in traverse_entries(ray, meta, max_range):
            if t < view.depth[v, u]:
                assert seed7_scene.sem.labels[ijk] == 0
            else:
                break


def test_instance_masks_partition_the_hit_pixels(seed7_scene):
    view = render_view(seed7_scene)
    total = np.zeros((view.height, view.width), dtype=int)
    for rec in seed7_scene.gt_instances.instances:
        m = instance_mask(view, rec.id)
        assert m.pixel_count() == int(np.count_nonzero(view.instance_ids == rec.id))
        total += m.flags
    assert total.max() <= 1
    assert np.array_equal(total > 0, view.instance_ids != 0)


def test_instance_mask_unknown_id_is_all_false(seed7_scene):
    view = render_view(seed7_scene)
    assert instance_mask(view, 999).pixel_count() == 0
    with pytest.raises(ValueError):
        instance_mask(view, 0)


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    mask = Mask2D(20, 10, rng.random((10, 20)) > 0.6)
    path = tmp_path / "m.pgm"
    save_mask_pgm(mask, path)
    loaded = load_mask_pgm(path)
    assert loaded.width == 20 and loaded.height == 10
    assert np.array_equal(loaded.flags, mask.flags)
    assert path.read_bytes().startswith(b"P5\n20 10\n255\n")


def test_pgm_rejects_other_values(tmp_path):
    path = tmp_path / "m.pgm"
    path.write_bytes(b"P5\n2 1\n255\n" + bytes([255, 7]))
    with pytest.raises(ValueError, match="0 or 255"):
        load_mask_pgm(path)


def test_pgm_rejects_wrong_size(tmp_path):
    path = tmp_path / "m.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(ValueError, match="payload"):
        load_mask_pgm(path)


def test_view_json_round_trip(tmp_path, seed7_scene):
    view = render_view(seed7_scene)
    path = tmp_path / "view.json"
    save_view(view, path)
    loaded = load_view(path)
    assert np.array_equal(loaded.class_ids, view.class_ids)
    assert np.array_equal(loaded.instance_ids, view.instance_ids)
    assert np.array_equal(loaded.depth, view.depth)
    again = tmp_path / "view2.json"
    save_view(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_spec_json_round_trip(tmp_path):
    spec = default_scene_spec(123, 6, dims=(32, 24, 16))
    path = tmp_path / "spec.json"
    path.write_bytes(spec_to_json(spec))
    assert load_scene_spec(path) == spec


def test_bundle_round_trip(tmp_path, seed7_scene):
    spec = default_scene_spec(7, 4)
    view = render_view(seed7_scene)
    save_bundle(seed7_scene, spec, tmp_path / "bundle", view)
    scene2, spec2 = load_bundle(tmp_path / "bundle")
    assert spec2 == spec
    assert scene2.sem == seed7_scene.sem
    assert scene2.gt_instances == seed7_scene.gt_instances
    assert np.array_equal(scene2.camera.rotation, seed7_scene.camera.rotation)
    masks = sorted((tmp_path / "bundle").glob("mask_*.pgm"))
    assert len(masks) == len(seed7_scene.gt_instances.instances)
    first = load_mask_pgm(masks[0])
    assert np.array_equal(first.flags, instance_mask(view, 1).flags)


def test_scene_spec_validation():
    meta = GridMeta((16, 16, 8), 0.1, (0, 0, 0))
    with pytest.raises(ValueError, match="background"):
        SceneSpec(0, meta, 1, (1,))
    with pytest.raises(ValueError, match="size range"):
        SceneSpec(0, meta, 1, (5,), size_range=((3, 30), (3, 4), (3, 4)))
    with pytest.raises(ValueError, match="non-negative"):
        SceneSpec(0, meta, -1, (5,))
