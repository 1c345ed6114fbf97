import numpy as np
import pytest

from dosekit import (
    BoundsError,
    GeometryError,
    Grid3,
    GridGeometry,
    StructureMask,
    crop_region,
    resample_mask,
    trilinear_resample,
    voxel_volume_cc,
)


def grid_of(values, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), unit="Gy"):
    values = np.asarray(values, dtype=np.float64)
    return Grid3(GridGeometry(values.shape, spacing, origin), values, unit)


class TestGeometry:
    def test_voxel_count(self):
        g = GridGeometry((4, 5, 6), (1, 1, 1))
        assert g.voxel_count == 120

    def test_rejects_zero_spacing(self):
        with pytest.raises(GeometryError):
            GridGeometry((2, 2, 2), (1.0, 0.0, 1.0))

    def test_rejects_zero_dims(self):
        with pytest.raises(GeometryError):
            GridGeometry((0, 2, 2), (1.0, 1.0, 1.0))

    def test_value_length_checked(self):
        with pytest.raises(GeometryError):
            Grid3(GridGeometry((2, 2, 2), (1, 1, 1)), np.zeros(7))


class TestVoxelVolume:
    def test_10mm_cube_is_1cc(self):
        assert voxel_volume_cc(GridGeometry((1, 1, 1), (10, 10, 10))) == 1.0

    def test_1mm_cube(self):
        assert voxel_volume_cc(GridGeometry((1, 1, 1), (1, 1, 1))) == 0.001

    def test_anisotropic(self):
        assert voxel_volume_cc(GridGeometry((1, 1, 1), (2, 2, 2.5))) == pytest.approx(0.01)


class TestTrilinearResample:
    def test_constant_field_any_target(self):
        src = grid_of(np.full((4, 3, 2), 7.0))
        target = GridGeometry((9, 5, 4), (0.41, 0.6, 0.55), (-1.0, 0.2, 0.0))
        out = trilinear_resample(src, target)
        assert np.all(out.values == 7.0)

    def test_identity_is_bitwise(self):
        rng = np.random.default_rng(0)
        src = grid_of(rng.uniform(0, 70, (5, 4, 3)), spacing=(2, 3, 1.5), origin=(4, -2, 1))
        out = trilinear_resample(src, src.geometry)
        assert out.values.tobytes() == src.values.tobytes()

    def test_midpoint_interpolation(self):
        # 2 voxels over a 2 mm extent resampled to 3 voxels over the same extent
        src = grid_of(np.array([0.0, 10.0]).reshape(2, 1, 1))
        target = GridGeometry((3, 1, 1), (2.0 / 3.0, 1.0, 1.0))
        out = trilinear_resample(src, target)
        np.testing.assert_allclose(out.values.ravel(), [0.0, 5.0, 10.0], atol=1e-12)

    def test_exact_for_affine_fields(self):
        geom = GridGeometry((8, 7, 6), (2.0, 1.5, 3.0), (5.0, -4.0, 2.0))
        a, bx, by, bz = 3.0, 0.25, -0.5, 1.25

        def affine(g):
            x, y, z = np.meshgrid(*(g.axis_centers(i) for i in range(3)), indexing="ij")
            return a + bx * x + by * y + bz * z

        src = Grid3(geom, affine(geom), "Gy")
        # interior target so clamping never engages
        target = GridGeometry((5, 5, 5), (1.7, 1.1, 2.0), (6.0, -3.0, 3.0))
        out = trilinear_resample(src, target)
        np.testing.assert_allclose(out.values, affine(target), rtol=1e-9)

    def test_out_of_bounds_clamps(self):
        src = grid_of(np.array([3.0, 9.0]).reshape(2, 1, 1))
        target = GridGeometry((2, 1, 1), (10.0, 1.0, 1.0), (-10.0, 0.0, 0.0))
        out = trilinear_resample(src, target)
        np.testing.assert_allclose(out.values.ravel(), [3.0, 9.0])

    def test_unit_preserved(self):
        src = grid_of(np.zeros((2, 2, 2)), unit="HU")
        out = trilinear_resample(src, src.geometry)
        assert out.unit == "HU"


class TestResampleMask:
    def mask_of(self, bits, spacing=(1.0, 1.0, 1.0)):
        bits = np.asarray(bits, dtype=bool)
        return StructureMask(GridGeometry(bits.shape, spacing), bits, "m", "OAR")

    def test_identity(self):
        rng = np.random.default_rng(1)
        m = self.mask_of(rng.random((4, 4, 4)) < 0.5)
        out = resample_mask(m, m.geometry)
        assert np.array_equal(out.bits, m.bits)

    def test_all_true_stays_all_true(self):
        m = self.mask_of(np.ones((3, 3, 3), dtype=bool))
        target = GridGeometry((7, 5, 2), (0.3, 0.7, 1.9))
        assert resample_mask(m, target).bits.all()

    def test_all_false_stays_all_false(self):
        m = self.mask_of(np.zeros((3, 3, 3), dtype=bool))
        target = GridGeometry((5, 5, 5), (0.5, 0.5, 0.5))
        assert not resample_mask(m, target).bits.any()

    def test_nearest_neighbor_upsample(self):
        # (true, false) over 2 mm -> 4 voxels over the same extent
        m = self.mask_of(np.array([True, False]).reshape(2, 1, 1))
        target = GridGeometry((4, 1, 1), (0.5, 1.0, 1.0))
        out = resample_mask(m, target)
        assert out.bits.ravel().tolist() == [True, True, False, False]

    def test_output_is_boolean(self):
        m = self.mask_of(np.array([True, False]).reshape(2, 1, 1))
        out = resample_mask(m, GridGeometry((5, 1, 1), (0.4, 1, 1)))
        assert out.bits.dtype == np.bool_


class TestCrop:
    def test_full_extent_is_identity(self):
        rng = np.random.default_rng(2)
        src = grid_of(rng.random((4, 5, 6)))
        out = crop_region(src, (0, 0, 0), (4, 5, 6))
        assert np.array_equal(out.values, src.values)
        assert out.geometry == src.geometry

    def test_first_voxel_matches_lower_corner(self):
        rng = np.random.default_rng(3)
        src = grid_of(rng.random((5, 5, 5)))
        out = crop_region(src, (2, 1, 3), (2, 2, 2))
        assert out.values[0, 0, 0] == src.values[2, 1, 3]

    def test_linear_index_block(self):
        vals = np.arange(64, dtype=np.float64).reshape(4, 4, 4)
        src = grid_of(vals)
        out = crop_region(src, (1, 1, 1), (2, 2, 2))
        assert np.array_equal(out.values, vals[1:3, 1:3, 1:3])

    def test_origin_shift(self):
        src = grid_of(np.zeros((4, 4, 4)), spacing=(2, 3, 4), origin=(1, 1, 1))
        out = crop_region(src, (1, 2, 3), (2, 1, 1))
        assert out.geometry.origin == (3.0, 7.0, 13.0)

    def test_out_of_range_raises(self):
        src = grid_of(np.zeros((4, 4, 4)))
        with pytest.raises(BoundsError):
            crop_region(src, (2, 0, 0), (3, 2, 2))
        with pytest.raises(BoundsError):
            crop_region(src, (-1, 0, 0), (2, 2, 2))

    def test_composition(self):
        rng = np.random.default_rng(4)
        src = grid_of(rng.random((8, 8, 8)), spacing=(1.5, 2.0, 1.0))
        twice = crop_region(crop_region(src, (1, 2, 0), (6, 5, 7)), (2, 1, 3), (3, 3, 3))
        once = crop_region(src, (3, 3, 3), (3, 3, 3))
        assert np.array_equal(twice.values, once.values)
        np.testing.assert_allclose(twice.geometry.origin, once.geometry.origin, rtol=1e-12)
