"""Grid containers, coordinate conversions, and .ogrd round trips."""
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occuground.grid import (
    DEFAULT_CLASS_TABLE,
    AffinityField,
    GridFormatError,
    GridMeta,
    GridSizeError,
    InstanceMap,
    InstanceRecord,
    LossMask,
    SemanticGrid,
    flatten_index,
    load_affinity,
    load_grid,
    load_instance_map,
    load_loss_mask,
    save_affinity,
    save_grid,
    save_instance_map,
    save_loss_mask,
    unflatten_index,
    volume_from_linear,
    volume_to_linear,
    voxel_to_world,
    world_to_voxel,
)

UNIT_META = GridMeta((4, 4, 4), 1.0, (0.0, 0.0, 0.0))


def test_world_to_voxel_interior_point():
    assert world_to_voxel((0.5, 0.5, 0.5), UNIT_META) == (0, 0, 0)


def test_world_to_voxel_below_origin_is_outside():
    assert world_to_voxel((-0.1, 0.0, 0.0), UNIT_META) is None


def test_world_to_voxel_interior_face_goes_to_higher_voxel():
    assert world_to_voxel((1.0, 2.0, 3.0), UNIT_META) == (1, 2, 3)


def test_world_to_voxel_max_corner_is_outside():
    assert world_to_voxel((4.0, 4.0, 4.0), UNIT_META) is None


def test_world_to_voxel_rejects_non_finite():
    with pytest.raises(ValueError):
        world_to_voxel((np.nan, 0.0, 0.0), UNIT_META)


def test_voxel_to_world_unit_grid():
    assert np.allclose(voxel_to_world((0, 0, 0), UNIT_META), (0.5, 0.5, 0.5))


def test_voxel_to_world_offset_grid():
    meta = GridMeta((8, 8, 8), 0.5, (1.0, 1.0, 1.0))
    assert np.allclose(voxel_to_world((2, 3, 4), meta), (2.25, 2.75, 3.25))


def test_voxel_to_world_rejects_out_of_range():
    with pytest.raises(ValueError):
        voxel_to_world((4, 0, 0), UNIT_META)


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(
        st.integers(min_value=1, max_value=20),
        st.integers(min_value=1, max_value=20),
        st.integers(min_value=1, max_value=20),
    ),
    st.floats(min_value=0.05, max_value=4.0, allow_nan=False),
    st.tuples(
        st.floats(min_value=-10, max_value=10),
        st.floats(min_value=-10, max_value=10),
        st.floats(min_value=-10, max_value=10),
    ),
    st.data(),
)
def test_voxel_world_round_trip(dims, voxel_size, origin, data):
    meta = GridMeta(dims, voxel_size, origin)
    idx = tuple(data.draw(st.integers(min_value=0, max_value=d - 1)) for d in dims)
    assert world_to_voxel(voxel_to_world(idx, meta), meta) == idx


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(
        st.integers(min_value=1, max_value=30),
        st.integers(min_value=1, max_value=30),
        st.integers(min_value=1, max_value=30),
    ),
    st.data(),
)
def test_linear_index_bijection(dims, data):
    idx = tuple(data.draw(st.integers(min_value=0, max_value=d - 1)) for d in dims)
    lin = flatten_index(idx, dims)
    assert 0 <= lin < dims[0] * dims[1] * dims[2]
    assert unflatten_index(lin, dims) == idx


def test_linear_order_is_x_fastest():
    dims = (3, 2, 2)
    assert flatten_index((1, 0, 0), dims) == 1
    assert flatten_index((0, 1, 0), dims) == 3
    assert flatten_index((0, 0, 1), dims) == 6


def test_volume_linear_round_trip():
    rng = np.random.default_rng(3)
    vol = rng.integers(0, 9, size=(5, 3, 2)).astype(np.uint8)
    flat = volume_to_linear(vol)
    assert flat[flatten_index((4, 1, 1), (5, 3, 2))] == vol[4, 1, 1]
    assert np.array_equal(volume_from_linear(flat, (5, 3, 2)), vol)
    vec = rng.normal(size=(5, 3, 2, 3)).astype(np.float32)
    assert np.array_equal(volume_from_linear(volume_to_linear(vec), (5, 3, 2), vector=True), vec)


def test_grid_meta_validation():
    with pytest.raises(ValueError):
        GridMeta((0, 4, 4), 1.0, (0, 0, 0))
    with pytest.raises(ValueError):
        GridMeta((4, 4, 4), 0.0, (0, 0, 0))
    with pytest.raises(ValueError):
        GridMeta((4, 4, 4), 1.0, (np.inf, 0, 0))
    with pytest.raises(GridSizeError):
        GridMeta((100000, 100000, 100000), 1.0, (0, 0, 0))


def test_semantic_grid_validation():
    labels = np.zeros((2, 2, 2), dtype=np.uint8)
    meta = GridMeta((2, 2, 2), 1.0, (0, 0, 0))
    with pytest.raises(ValueError):
        SemanticGrid(meta, labels, ("not_empty", "chair"))
    with pytest.raises(ValueError):
        SemanticGrid(meta, labels, ("empty", "chair", "chair"))
    labels[0, 0, 0] = 9
    with pytest.raises(ValueError):
        SemanticGrid(meta, labels, ("empty", "chair"))


def test_instance_map_validation():
    meta = GridMeta((3, 1, 1), 1.0, (0, 0, 0))
    ids = np.zeros((3, 1, 1), dtype=np.uint32)
    ids[0, 0, 0] = 1
    ids[2, 0, 0] = 1
    good = InstanceRecord(1, 5, (1.0, 0.0, 0.0), 2)
    InstanceMap(meta, ids, (good,))
    with pytest.raises(ValueError):
        InstanceMap(meta, ids, (InstanceRecord(1, 5, (1.0, 0.0, 0.0), 3),))
    with pytest.raises(ValueError):
        InstanceMap(meta, ids, (InstanceRecord(2, 5, (1.0, 0.0, 0.0), 2),))
    with pytest.raises(ValueError):
        InstanceMap(meta, ids, (InstanceRecord(1, 5, (0.5, 0.0, 0.0), 2),))
    with pytest.raises(ValueError):
        InstanceMap(meta, ids, ())


def _random_grid(rng, dims=(4, 4, 4)) -> SemanticGrid:
    meta = GridMeta(dims, 0.25, (-1.0, 0.5, 2.0))
    labels = rng.integers(0, len(DEFAULT_CLASS_TABLE), size=dims).astype(np.uint8)
    return SemanticGrid(meta, labels)


def test_semantic_grid_round_trip(tmp_path):
    grid = _random_grid(np.random.default_rng(7))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    loaded = load_grid(path)
    assert loaded == grid
    again = tmp_path / "g2.ogrd"
    save_grid(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_affinity_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    meta = GridMeta((3, 5, 2), 0.1, (0, 0, 0))
    field = AffinityField(meta, rng.normal(size=(3, 5, 2, 3)).astype(np.float32))
    path = tmp_path / "a.ogrd"
    save_affinity(field, path)
    loaded = load_affinity(path)
    assert loaded == field
    again = tmp_path / "a2.ogrd"
    save_affinity(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_loss_mask_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    meta = GridMeta((4, 2, 3), 1.0, (0, 0, 0))
    mask = LossMask(meta, rng.random((4, 2, 3)) > 0.5)
    path = tmp_path / "m.ogrd"
    save_loss_mask(mask, path)
    loaded = load_loss_mask(path)
    assert loaded == mask
    again = tmp_path / "m2.ogrd"
    save_loss_mask(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_instance_map_round_trip(tmp_path):
    meta = GridMeta((4, 4, 4), 0.5, (0, 0, 0))
    ids = np.zeros((4, 4, 4), dtype=np.uint32)
    ids[0, 0, 0] = 1
    ids[2:4, 1, 1] = 2
    records = (
        InstanceRecord(1, 4, (0.0, 0.0, 0.0), 1),
        InstanceRecord(2, 6, (2.5, 1.0, 1.0), 2),
    )
    inst = InstanceMap(meta, ids, records)
    path = tmp_path / "i.ogrd"
    save_instance_map(inst, path)
    loaded = load_instance_map(path)
    assert loaded == inst
    again = tmp_path / "i2.ogrd"
    save_instance_map(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_grid_file_exact_bytes(tmp_path):
    """Pin the wire layout for a 2x1x1 grid with a two-entry class table."""
    meta = GridMeta((2, 1, 1), 1.0, (0.0, 0.0, 0.0))
    labels = np.array([[[0]], [[1]]], dtype=np.uint8)
    grid = SemanticGrid(meta, labels, ("empty", "box"))
    path = tmp_path / "tiny.ogrd"
    save_grid(grid, path)
    want = b"OGRD" + bytes([1, 1, 0, 0])
    want += struct.pack("<3I", 2, 1, 1)
    want += struct.pack("<f", 1.0) + struct.pack("<3f", 0.0, 0.0, 0.0)
    want += struct.pack("<H", 2)
    want += struct.pack("<H", 5) + b"empty" + struct.pack("<H", 3) + b"box"
    want += bytes([0, 1])
    assert path.read_bytes() == want


def test_load_rejects_bad_magic(tmp_path):
    grid = _random_grid(np.random.default_rng(1))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(GridFormatError, match="bad magic"):
        load_grid(path)


def test_load_rejects_truncated_payload(tmp_path):
    grid = _random_grid(np.random.default_rng(2))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(GridFormatError, match="payload shorter than header promises"):
        load_grid(path)


def test_load_rejects_unsupported_version(tmp_path):
    grid = _random_grid(np.random.default_rng(3))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    data = bytearray(path.read_bytes())
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(GridFormatError, match="version"):
        load_grid(path)


def test_load_rejects_wrong_kind(tmp_path):
    grid = _random_grid(np.random.default_rng(4))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    with pytest.raises(GridFormatError, match="kind"):
        load_affinity(path)


def test_load_rejects_trailing_bytes(tmp_path):
    grid = _random_grid(np.random.default_rng(5))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(GridFormatError, match="trailing"):
        load_grid(path)


def test_load_rejects_dimension_overflow(tmp_path):
    grid = _random_grid(np.random.default_rng(6))
    path = tmp_path / "g.ogrd"
    save_grid(grid, path)
    data = bytearray(path.read_bytes())
    struct.pack_into("<3I", data, 8, 2**20, 2**20, 2**20)
    path.write_bytes(bytes(data))
    with pytest.raises(GridSizeError):
        load_grid(path)


def test_containers_are_immutable():
    grid = _random_grid(np.random.default_rng(10))
    with pytest.raises(ValueError):
        grid.labels[0, 0, 0] = 3
