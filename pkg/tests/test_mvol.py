import numpy as np
import pytest

from dosekit import (
    DataError,
    Grid3,
    GridGeometry,
    StructureMask,
    load_case,
    read_grid,
    read_mask,
    save_case,
    write_grid,
    write_mask,
)


def test_grid_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    geom = GridGeometry((6, 5, 4), (2.0, 2.5, 3.0), (-12.5, 0.25, 7.0))
    grid = Grid3(geom, rng.uniform(0, 70, geom.dims).astype(np.float32), "Gy")
    path = tmp_path / "dose.mvol"
    write_grid(path, grid)
    raw = path.read_bytes()

    loaded = read_grid(path)
    assert loaded.geometry == geom
    assert loaded.unit == "Gy"
    # values survive exactly (file stores f32, grid here is f32-valued)
    assert np.array_equal(loaded.values.astype(np.float32), grid.values)

    # write(read(f)) reproduces the file byte for byte
    path2 = tmp_path / "dose2.mvol"
    write_grid(path2, loaded)
    assert path2.read_bytes() == raw


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    geom = GridGeometry((4, 4, 4), (8.0, 8.0, 8.0))
    mask = StructureMask(geom, rng.random(geom.dims) < 0.3, "cord", "OAR")
    path = tmp_path / "cord.mvol"
    write_mask(path, mask)
    loaded = read_mask(path, "cord", "OAR")
    assert np.array_equal(loaded.bits, mask.bits)
    write_mask(tmp_path / "cord2.mvol", loaded)
    assert (tmp_path / "cord2.mvol").read_bytes() == path.read_bytes()


def test_x_fastest_serialization(tmp_path):
    geom = GridGeometry((2, 2, 1), (1, 1, 1))
    grid = Grid3(geom, np.array([[[0.0], [2.0]], [[1.0], [3.0]]]), "Gy")
    path = tmp_path / "g.mvol"
    write_grid(path, grid)
    blob = path.read_bytes().split(b"\n", 2)[2]
    # flat order must be x-fastest: (0,0), (1,0), (0,1), (1,1)
    assert np.frombuffer(blob, dtype="<f4").tolist() == [0.0, 1.0, 2.0, 3.0]


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.mvol"
    path.write_bytes(b"NOPE\n{}\n")
    with pytest.raises(DataError):
        read_grid(path)


def test_truncated_payload_rejected(tmp_path):
    geom = GridGeometry((4, 4, 4), (1, 1, 1))
    grid = Grid3(geom, np.zeros(geom.dims), "Gy")
    path = tmp_path / "t.mvol"
    write_grid(path, grid)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(DataError):
        read_grid(path)


def test_case_round_trip(tmp_path, phantom32):
    save_case(tmp_path / "case", phantom32)
    loaded = load_case(tmp_path / "case")
    assert loaded.case_id == phantom32.case_id
    assert loaded.ct.geometry == phantom32.ct.geometry
    assert [s.name for s in loaded.structures] == [s.name for s in phantom32.structures]
    assert loaded.ptv.role == "PTV"
    for orig, back in zip(phantom32.structures, loaded.structures):
        assert np.array_equal(orig.bits, back.bits)
    # dose survives at f32 precision
    np.testing.assert_array_equal(
        loaded.dose.values, phantom32.dose.values.astype(np.float32).astype(np.float64)
    )
