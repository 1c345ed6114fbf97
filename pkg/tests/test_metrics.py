import numpy as np
import pytest
from scipy.special import expit

from dosekit import (
    DataError,
    Grid3,
    GridGeometry,
    StructureMask,
    DvhLossSpec,
    clinical_report,
    compute_report,
    dose_at_cc,
    dose_at_percent,
    dose_score,
    dvh_score,
    dvh_vector_approx,
    exact_dvh_curve,
    homogeneity_index,
    paddick_ci,
    voxel_volume_cc,
)
from conftest import random_instance


# ---------------------------------------------------------------------------
# Brute-force oracles (independent of the library implementations)
# ---------------------------------------------------------------------------

def bf_dose_at_percent(masked, x):
    """Largest candidate dose d with coverage(d) >= x% of voxels."""
    n = len(masked)
    required = x * n / 100.0
    best = None
    for d in sorted(set(masked.tolist()), reverse=True):
        count = sum(1 for v in masked if v >= d)
        if count >= required:
            best = d
            break
    return best


def bf_dose_at_cc(masked, vol_cc, vox_cc):
    k = max(1, int(round(vol_cc / vox_cc)))
    k = min(k, len(masked))
    return sorted(masked.tolist(), reverse=True)[k - 1]


def bf_dvh_fraction(masked, edge):
    return sum(1 for v in masked if v >= edge) / len(masked)


def bf_hi(masked):
    return (bf_dose_at_percent(masked, 2) - bf_dose_at_percent(masked, 98)) / bf_dose_at_percent(masked, 50)


def bf_pci(values, bits, level):
    tv = int(bits.sum())
    piv = int((values >= level).sum())
    if piv == 0:
        return 0.0
    tv_piv = int(((values >= level) & bits).sum())
    return tv_piv * tv_piv / (tv * piv)


def mask_on(shape, bits, role="PTV", spacing=(10.0, 10.0, 10.0)):
    geom = GridGeometry(shape, spacing)
    return StructureMask(geom, np.asarray(bits, dtype=bool), "s", role)


class TestExactDvhCurve:
    def test_uniform_dose_step(self):
        dose = np.full((3, 3, 3), 60.0)
        curve = exact_dvh_curve(dose, mask_on((3, 3, 3), np.ones((3, 3, 3))), bin_width=10.0)
        for e, f in zip(curve.edges, curve.fractions):
            assert f == (1.0 if e <= 60.0 else 0.0)
        assert curve.fractions[0] == 1.0
        assert curve.fractions[-1] == 0.0

    def test_counting_oracle(self):
        dose = np.arange(10, 101, 10, dtype=np.float64).reshape(10, 1, 1)
        curve = exact_dvh_curve(dose, mask_on((10, 1, 1), np.ones((10, 1, 1))), bin_width=1.0)
        idx60 = int(np.argwhere(curve.edges == 60.0)[0, 0])
        assert curve.fractions[idx60] == 0.5

    def test_nonincreasing(self):
        for seed in range(20):
            dose, mask = random_instance(seed)
            curve = exact_dvh_curve(dose.values, mask, bin_width=0.5)
            assert np.all(np.diff(curve.fractions) <= 0)


class TestDoseAtPercent:
    def test_uniform(self):
        dose = np.full((4, 4, 4), 55.0)
        m = mask_on((4, 4, 4), np.ones((4, 4, 4)))
        for x in (1, 50, 95, 100):
            assert dose_at_percent(dose, m, x) == 55.0

    def test_counting_oracle_example(self):
        dose = np.arange(10, 101, 10, dtype=np.float64).reshape(10, 1, 1)
        m = mask_on((10, 1, 1), np.ones((10, 1, 1)))
        assert dose_at_percent(dose, m, 50) == 60.0

    def test_extremes(self):
        rng = np.random.default_rng(0)
        dose = rng.uniform(0, 70, (5, 5, 5))
        m = mask_on((5, 5, 5), np.ones((5, 5, 5)))
        assert dose_at_percent(dose, m, 100) == dose.min()
        assert dose_at_percent(dose, m, 1e-9) == dose.max()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for seed in range(100):
            dose, mask = random_instance(seed, shape=(9, 9, 9))
            masked = dose.values[mask.bits]
            x = float(rng.choice([1, 2, 5, 50, 95, 98, 99, 100, 37.5]))
            assert dose_at_percent(dose.values, mask, x) == bf_dose_at_percent(masked, x)

    def test_exact_integer_boundary(self):
        # 40 voxels, x=95 -> requires exactly 38 voxels; float naivety would
        # demand 39
        dose = np.arange(1.0, 41.0).reshape(40, 1, 1)
        m = mask_on((40, 1, 1), np.ones((40, 1, 1)))
        assert dose_at_percent(dose, m, 95) == 3.0


class TestDoseAtCc:
    def test_small_volume_is_max(self):
        dose, mask = random_instance(2)
        top = dose.values[mask.bits].max()
        assert dose_at_cc(dose.values, mask, 0.1, mask.geometry) == top

    def test_counting_oracle(self):
        # 8 voxels of 1 cc each, doses 10..80, hottest 2 cc -> 70
        dose = np.arange(10, 81, 10, dtype=np.float64).reshape(8, 1, 1)
        m = mask_on((8, 1, 1), np.ones((8, 1, 1)), spacing=(10.0, 10.0, 10.0))
        assert voxel_volume_cc(m.geometry) == 1.0
        assert dose_at_cc(dose, m, 2.0, m.geometry) == 70.0

    def test_uniform(self):
        dose = np.full((4, 4, 4), 33.0)
        m = mask_on((4, 4, 4), np.ones((4, 4, 4)))
        for cc in (0.1, 1.0, 12.0):
            assert dose_at_cc(dose, m, cc, m.geometry) == 33.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for seed in range(100):
            dose, mask = random_instance(seed, shape=(8, 8, 8))
            masked = dose.values[mask.bits]
            cc = float(rng.uniform(0.05, 5.0))
            vox = voxel_volume_cc(mask.geometry)
            assert dose_at_cc(dose.values, mask, cc, mask.geometry) == bf_dose_at_cc(masked, cc, vox)


class TestDoseScore:
    def test_identical(self):
        dose, _ = random_instance(4)
        assert dose_score(dose.values, dose.values.copy()) == 0.0

    def test_offset(self):
        dose, _ = random_instance(5)
        assert dose_score(dose.values + 1.0, dose.values) == pytest.approx(1.0)

    def test_hand_example(self):
        assert dose_score(np.array([[[1.0]], [[3.0]]]),
                          np.array([[[2.0]], [[5.0]]])) == pytest.approx(1.5)


class TestDvhScore:
    def test_identical_is_zero(self, phantom32):
        score, rows = dvh_score(phantom32.dose, phantom32.dose, phantom32.structures)
        assert score == 0.0
        assert len(rows) == 3 + 2 * 5  # PTV D99/D95/D1 + mean/D0.1cc per OAR

    def test_uniform_shift_only_ptv(self):
        rng = np.random.default_rng(6)
        geom = GridGeometry((6, 6, 6), (8, 8, 8))
        ref = Grid3(geom, rng.uniform(20, 60, geom.dims), "Gy")
        ptv = StructureMask(geom, rng.random(geom.dims) < 0.5, "ptv", "PTV")
        pred = ref.with_values(ref.values + 2.0)
        score, rows = dvh_score(pred, ref, [ptv])
        assert len(rows) == 3
        for r in rows:
            assert r["abs_error"] == pytest.approx(2.0, abs=1e-9)
        assert score == pytest.approx(2.0, abs=1e-9)

    def test_symmetric(self, phantom32):
        rng = np.random.default_rng(7)
        pred = phantom32.dose.with_values(
            np.maximum(phantom32.dose.values + rng.normal(0, 3, phantom32.dose.values.shape), 0))
        a, _ = dvh_score(pred, phantom32.dose, phantom32.structures)
        b, _ = dvh_score(phantom32.dose, pred, phantom32.structures)
        assert a == pytest.approx(b, rel=1e-12)

    def test_triangle_inequality_per_criterion(self):
        geom = GridGeometry((6, 6, 6), (8, 8, 8))
        rng = np.random.default_rng(8)
        ptv = StructureMask(geom, rng.random(geom.dims) < 0.5, "ptv", "PTV")
        a, b, c = (rng.uniform(0, 70, geom.dims) for _ in range(3))
        _, ab = dvh_score(a, b, [ptv])
        _, bc = dvh_score(b, c, [ptv])
        _, ac = dvh_score(a, c, [ptv])
        for r_ab, r_bc, r_ac in zip(ab, bc, ac):
            assert r_ac["abs_error"] <= r_ab["abs_error"] + r_bc["abs_error"] + 1e-12

    def test_requires_ptv(self):
        geom = GridGeometry((3, 3, 3), (8, 8, 8))
        oar = StructureMask(geom, np.ones(geom.dims, bool), "cord", "OAR")
        with pytest.raises(DataError):
            dvh_score(np.zeros(geom.dims), np.zeros(geom.dims), [oar])


class TestHomogeneityIndex:
    def test_uniform_is_zero(self):
        dose = np.full((4, 4, 4), 60.0)
        assert homogeneity_index(dose, mask_on((4, 4, 4), np.ones((4, 4, 4)))) == 0.0

    def test_three_level_oracle(self):
        dose = np.array([59.0, 60.0, 61.0]).reshape(3, 1, 1)
        hi = homogeneity_index(dose, mask_on((3, 1, 1), np.ones((3, 1, 1))))
        assert hi == pytest.approx((61.0 - 59.0) / 60.0)

    def test_scale_invariant(self):
        for seed in range(20):
            dose, mask = random_instance(seed, lo=1.0, hi=70.0, role="PTV")
            h1 = homogeneity_index(dose.values, mask)
            h2 = homogeneity_index(dose.values * 3.5, mask)
            assert h2 == pytest.approx(h1, rel=1e-12)

    def test_matches_brute_force(self):
        for seed in range(100):
            dose, mask = random_instance(seed, shape=(9, 9, 9), lo=1.0, hi=70.0)
            masked = dose.values[mask.bits]
            assert homogeneity_index(dose.values, mask) == bf_hi(masked)


class TestPaddick:
    def test_perfect_conformity(self):
        bits = np.zeros((5, 5, 5), dtype=bool)
        bits[1:4, 1:4, 1:4] = True
        dose = np.where(bits, 62.0, 30.0)
        assert paddick_ci(dose, mask_on((5, 5, 5), bits), 60.0) == 1.0

    def test_half_overlap_formula(self):
        # TV=100, PIV=100, overlap 50 -> 0.25
        bits = np.zeros((200, 1, 1), dtype=bool)
        bits[:100] = True
        dose = np.zeros((200, 1, 1))
        dose[50:150] = 60.0
        assert paddick_ci(dose, mask_on((200, 1, 1), bits), 60.0) == pytest.approx(0.25)

    def test_zero_when_no_isodose(self):
        dose, mask = random_instance(9, hi=30.0)
        assert paddick_ci(dose.values, mask, 60.0) == 0.0

    def test_in_unit_interval_and_matches_brute_force(self):
        for seed in range(100):
            dose, mask = random_instance(seed, shape=(9, 9, 9))
            pci = paddick_ci(dose.values, mask, 40.0)
            assert 0.0 <= pci <= 1.0
            assert pci == bf_pci(dose.values, mask.bits, 40.0)


class TestClinicalReport:
    def structures(self, geom):
        rng = np.random.default_rng(10)
        names = [("ptv", "PTV"), ("lung_left", "OAR"), ("lung_right", "OAR"),
                 ("heart", "OAR"), ("esophagus", "OAR"), ("cord", "OAR")]
        return [StructureMask(geom, rng.random(geom.dims) < 0.4, n, r) for n, r in names]

    def test_zero_dose_all_oar_rows_pass(self):
        geom = GridGeometry((6, 6, 6), (8, 8, 8))
        structures = self.structures(geom)
        rows = clinical_report(np.zeros(geom.dims), structures)
        for row in rows:
            assert row["evaluable"]
            if row["structure"] != "ptv":
                assert row["pass"]

    def test_cord_max_limit(self):
        geom = GridGeometry((4, 4, 4), (8, 8, 8))
        cord = StructureMask(geom, np.ones(geom.dims, bool), "cord", "OAR")
        rows49 = clinical_report(np.full(geom.dims, 49.0), [cord])
        rows51 = clinical_report(np.full(geom.dims, 51.0), [cord])
        row49 = next(r for r in rows49 if r["structure"] == "cord")
        row51 = next(r for r in rows51 if r["structure"] == "cord")
        assert row49["pass"] is True
        assert row51["pass"] is False

    def test_heart_v30(self):
        geom = GridGeometry((10, 1, 1), (8, 8, 8))
        heart = StructureMask(geom, np.ones(geom.dims, bool), "heart", "OAR")
        dose = np.zeros(geom.dims)
        dose[:6] = 31.0  # 60% of voxels at >= 30 Gy fails the 50% limit
        rows = clinical_report(dose, [heart])
        v30 = next(r for r in rows if "V(30Gy)" in r["criterion"])
        assert v30["achieved"] == pytest.approx(60.0)
        assert v30["pass"] is False

    def test_absent_structure_not_evaluable(self):
        geom = GridGeometry((3, 3, 3), (8, 8, 8))
        cord = StructureMask(geom, np.ones(geom.dims, bool), "cord", "OAR")
        rows = clinical_report(np.zeros(geom.dims), [cord])
        heart_rows = [r for r in rows if r["structure"] == "heart"]
        assert heart_rows and all(not r["evaluable"] for r in heart_rows)


class TestApproxVsExactCurve:
    def test_componentwise_agreement_far_from_thresholds(self):
        rng = np.random.default_rng(11)
        shape = (8, 8, 8)
        beta = 1.0
        thresholds = (25.0, 35.0)
        low = rng.uniform(0.0, 5.0, shape)
        high = rng.uniform(55.0, 75.0, shape)
        dose = np.where(rng.random(shape) < 0.5, low, high)
        mask = mask_on(shape, rng.random(shape) < 0.6)
        approx = dvh_vector_approx(dose, mask, DvhLossSpec(thresholds=thresholds, beta=beta))
        md = dose[mask.bits]
        exact = np.array([np.count_nonzero(md >= t) / md.size for t in thresholds])
        assert np.max(np.abs(approx - exact)) <= expit(-10.0)


def test_compute_report_perfect_prediction(phantom32):
    report = compute_report(phantom32.dose, phantom32.dose, phantom32.structures,
                            case_id=phantom32.case_id)
    assert report.dose_score == 0.0
    assert report.dvh_score == 0.0
    assert report.hi_error == 0.0
    assert report.pci_error == 0.0
    assert report.dvh_curves["cord"]["ref"] == report.dvh_curves["cord"]["pred"]
    assert report.to_json()["case_id"] == phantom32.case_id
