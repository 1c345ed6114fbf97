import json

import numpy as np
import pytest
from scipy.ndimage import distance_transform_edt

from dosekit import PhantomSpec, generate_dataset, generate_phantom, load_case


def test_same_seed_bit_identical():
    a = generate_phantom(PhantomSpec(seed=42))
    b = generate_phantom(PhantomSpec(seed=42))
    assert a.ct.values.tobytes() == b.ct.values.tobytes()
    assert a.dose.values.tobytes() == b.dose.values.tobytes()
    for sa, sb in zip(a.structures, b.structures):
        assert np.array_equal(sa.bits, sb.bits)


def test_different_seeds_differ():
    a = generate_phantom(PhantomSpec(seed=1))
    b = generate_phantom(PhantomSpec(seed=2))
    assert not np.array_equal(a.ptv.bits, b.ptv.bits)


def test_ptv_mean_is_prescription():
    for seed in (0, 5, 9):
        case = generate_phantom(PhantomSpec(seed=seed))
        assert np.mean(case.dose.values[case.ptv.bits]) == pytest.approx(60.0, rel=1e-9)


def test_expected_structures_present(phantom32):
    names = set(phantom32.structure_names())
    assert names == {"ptv", "esophagus", "cord", "heart", "lung_left", "lung_right"}
    assert all(s.voxel_count > 0 for s in phantom32.structures)


def test_dose_monotone_falloff(phantom32):
    spec = PhantomSpec(seed=3)
    dose = phantom32.dose.values
    inside_min = dose[phantom32.ptv.bits].min()
    dist = distance_transform_edt(~phantom32.ptv.bits,
                                  sampling=phantom32.ct.geometry.spacing)
    far = dist >= 2 * spec.falloff_mm
    assert far.any()
    assert inside_min >= dose[far].max()


def test_dose_nonnegative(phantom32):
    assert phantom32.dose.values.min() >= 0.0


def test_ptv_does_not_touch_cord(phantom32):
    cord = phantom32.structure("cord")
    assert not np.any(phantom32.ptv.bits & cord.bits)


def test_ct_is_hu_with_lung_contrast(phantom32):
    assert phantom32.ct.unit == "HU"
    # tumor voxels inside the lung are soft tissue; exclude them
    lung_bits = phantom32.structure("lung_left").bits & ~phantom32.ptv.bits
    lung = phantom32.ct.values[lung_bits]
    soft = phantom32.ct.values[phantom32.structure("heart").bits & ~phantom32.ptv.bits]
    assert lung.mean() < -500
    assert abs(soft.mean() - 40) < 30


def test_cord_table1_calibration():
    # cord max below the 50 Gy clinical limit in at least 90% of cases
    ok = 0
    n = 20
    for seed in range(100, 100 + n):
        case = generate_phantom(PhantomSpec(seed=seed))
        cord_max = case.dose.values[case.structure("cord").bits].max()
        ok += cord_max < 50.0
    assert ok >= 0.9 * n


class TestDataset:
    def test_split_and_round_trip(self, tmp_path):
        manifest = generate_dataset(36, base_seed=17, out_dir=tmp_path, dims=(16, 16, 16))
        counts = manifest["split_counts"]
        assert counts == {"train": 24, "val": 5, "test": 7}
        assert len(manifest["cases"]) == 36

        with open(tmp_path / "manifest.json") as f:
            on_disk = json.load(f)
        assert on_disk["split_counts"] == counts

        seen_centers = set()
        for entry in manifest["cases"][:6]:
            case = load_case(tmp_path / entry["dir"])
            assert case.ct.geometry.dims == (16, 16, 16)
            idx = np.argwhere(case.ptv.bits)
            seen_centers.add(tuple(idx.mean(axis=0).round(3)))
        assert len(seen_centers) == 6  # distinct seeds give distinct PTV centers

    def test_seed_assignment(self, tmp_path):
        manifest = generate_dataset(3, base_seed=5, out_dir=tmp_path, dims=(16, 16, 16),
                                    split=(1, 1, 1))
        assert [c["seed"] for c in manifest["cases"]] == [5, 6, 7]
        assert [c["split"] for c in manifest["cases"]] == ["train", "val", "test"]
