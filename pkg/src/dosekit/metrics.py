"""Exact (non-differentiable) dose evaluation.

Dose score (voxel MAE), DVH criteria and DVH score, homogeneity index
(D2 - D98)/D50, Paddick conformity index TV_PIV^2/(TV*PIV), and the
clinical max/mean/dose-volume criteria report.

Percentile convention: Dx is the largest dose received by at least x% of
the structure's voxels, at voxel granularity (no interpolation).  The
required count is computed as ceil(x*n/100); for integer percents this is
exact in float arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .volume import Grid3, GridGeometry, StructureMask, require_same_geometry, voxel_volume_cc


@dataclass
class DvhCurve:
    """Exact cumulative DVH: fraction of volume receiving >= each bin edge."""

    structure: str
    edges: np.ndarray
    fractions: np.ndarray


@dataclass(frozen=True)
class DvhCriterion:
    """One DVH-score criterion: mean dose, dose at hottest volume, or Dx."""

    structure: str
    kind: str          # "mean" | "dose_at_cc" | "dose_at_percent"
    arg: float = 0.0   # cc for dose_at_cc, percent for dose_at_percent

    def __post_init__(self):
        if self.kind not in ("mean", "dose_at_cc", "dose_at_percent"):
            raise DataError(f"unknown criterion kind {self.kind!r}")
        if self.kind == "dose_at_percent" and not 0 < self.arg <= 100:
            raise DataError(f"percent must be in (0, 100], got {self.arg}")
        if self.kind == "dose_at_cc" and not self.arg > 0:
            raise DataError(f"volume must be > 0 cc, got {self.arg}")

    def label(self) -> str:
        if self.kind == "mean":
            return "mean"
        if self.kind == "dose_at_cc":
            return f"D{self.arg:g}cc"
        return f"D{self.arg:g}"


def _masked(dose, mask: StructureMask) -> np.ndarray:
    values = dose.values if isinstance(dose, Grid3) else np.asarray(dose)
    if mask.voxel_count == 0:
        raise DataError(f"structure {mask.name!r} is empty")
    return np.asarray(values[mask.bits], dtype=np.float64)


def exact_dvh_curve(dose, mask: StructureMask, bin_width: float = 0.5) -> DvhCurve:
    """Heaviside-counted cumulative DVH on a uniform edge grid from 0 Gy."""
    if not bin_width > 0:
        raise DataError("bin_width must be > 0")
    d = np.sort(_masked(dose, mask))
    top = float(d[-1])
    n_edges = int(math.floor(top / bin_width)) + 2
    edges = np.arange(n_edges) * bin_width
    # fraction at edge e: |{j : d_j >= e}| / n
    counts = d.size - np.searchsorted(d, edges, side="left")
    return DvhCurve(mask.name, edges, counts / d.size)


def dose_at_percent(dose, mask: StructureMask, x: float) -> float:
    """Largest dose d such that at least x% of structure voxels receive >= d."""
    if not 0 < x <= 100:
        raise DataError(f"percent must be in (0, 100], got {x}")
    d = _masked(dose, mask)
    k = math.ceil(x * d.size / 100.0)
    d_sorted = np.sort(d)[::-1]
    return float(d_sorted[k - 1])


def dose_at_cc(dose, mask: StructureMask, vol_cc: float, geometry: GridGeometry) -> float:
    """Minimum dose in the hottest vol_cc of the structure (near-max surrogate)."""
    if not vol_cc > 0:
        raise DataError(f"volume must be > 0 cc, got {vol_cc}")
    d = _masked(dose, mask)
    k = max(1, int(round(vol_cc / voxel_volume_cc(geometry))))
    k = min(k, d.size)
    return float(np.sort(d)[::-1][k - 1])


def dose_score(pred, ref) -> float:
    """Voxel-wise mean absolute error in Gy."""
    p = pred.values if isinstance(pred, Grid3) else np.asarray(pred)
    r = ref.values if isinstance(ref, Grid3) else np.asarray(ref)
    if p.shape != r.shape:
        raise DataError(f"pred/ref shape mismatch: {p.shape} vs {r.shape}")
    return float(np.mean(np.abs(np.asarray(p, dtype=np.float64) - r)))


def default_dvh_criteria(structures: list[StructureMask]) -> list[DvhCriterion]:
    """Mean and D0.1cc per OAR; D99, D95, D1 for the PTV."""
    criteria = []
    for s in structures:
        if s.role == "PTV":
            criteria += [
                DvhCriterion(s.name, "dose_at_percent", 99),
                DvhCriterion(s.name, "dose_at_percent", 95),
                DvhCriterion(s.name, "dose_at_percent", 1),
            ]
        else:
            criteria += [
                DvhCriterion(s.name, "mean"),
                DvhCriterion(s.name, "dose_at_cc", 0.1),
            ]
    return criteria


def eval_criterion(criterion: DvhCriterion, dose, mask: StructureMask,
                   geometry: GridGeometry) -> float:
    if criterion.kind == "mean":
        return float(np.mean(_masked(dose, mask)))
    if criterion.kind == "dose_at_cc":
        return dose_at_cc(dose, mask, criterion.arg, geometry)
    return dose_at_percent(dose, mask, criterion.arg)


def dvh_score(pred, ref, structures: list[StructureMask],
              criteria: list[DvhCriterion] | None = None) -> tuple[float, list[dict]]:
    """Mean absolute DVH-criterion error and the per-criterion rows."""
    if not any(s.role == "PTV" for s in structures):
        raise DataError("dvh_score requires a PTV structure")
    geometry = require_same_geometry(*structures)
    if criteria is None:
        criteria = default_dvh_criteria(structures)
    by_name = {s.name: s for s in structures}

    rows = []
    for c in criteria:
        mask = by_name[c.structure]
        v_ref = eval_criterion(c, ref, mask, geometry)
        v_pred = eval_criterion(c, pred, mask, geometry)
        rows.append({
            "structure": c.structure,
            "criterion": c.label(),
            "ref": v_ref,
            "pred": v_pred,
            "abs_error": abs(v_ref - v_pred),
        })
    score = float(np.mean([r["abs_error"] for r in rows]))
    return score, rows


def homogeneity_index(dose, ptv: StructureMask) -> float:
    """(D2 - D98)/D50 inside the PTV; 0 for perfectly uniform dose."""
    d2 = dose_at_percent(dose, ptv, 2)
    d98 = dose_at_percent(dose, ptv, 98)
    d50 = dose_at_percent(dose, ptv, 50)
    if d50 == 0:
        raise DataError("homogeneity index undefined: D50 = 0")
    return (d2 - d98) / d50


def paddick_ci(dose, ptv: StructureMask, isodose_level: float = 60.0) -> float:
    """TV_PIV^2 / (TV * PIV) at the given isodose level; 0 when PIV is empty."""
    values = dose.values if isinstance(dose, Grid3) else np.asarray(dose)
    tv = ptv.voxel_count
    if tv == 0:
        raise DataError("PTV mask is empty")
    piv_mask = values >= isodose_level
    piv = int(np.count_nonzero(piv_mask))
    if piv == 0:
        return 0.0
    tv_piv = int(np.count_nonzero(piv_mask & ptv.bits))
    return tv_piv * tv_piv / (tv * piv)


# ---------------------------------------------------------------------------
# Clinical criteria (max / mean / V(dose) <= percent)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClinicalCriterion:
    structure: str
    kind: str            # "max" | "mean" | "vdose"
    limit: float         # Gy for max/mean, percent of volume for vdose
    dose_gy: float = 0.0  # threshold dose for vdose rows

    def label(self) -> str:
        if self.kind == "vdose":
            return f"V({self.dose_gy:g}Gy) <= {self.limit:g}%"
        return f"{self.kind} <= {self.limit:g} Gy"


# Lung criteria are applied to each lung mask separately at phantom scale.
DEFAULT_CLINICAL_CRITERIA = (
    ClinicalCriterion("ptv", "max", 72.0),
    ClinicalCriterion("lung_left", "max", 66.0),
    ClinicalCriterion("lung_left", "mean", 21.0),
    ClinicalCriterion("lung_left", "vdose", 37.0, dose_gy=20.0),
    ClinicalCriterion("lung_right", "max", 66.0),
    ClinicalCriterion("lung_right", "mean", 21.0),
    ClinicalCriterion("lung_right", "vdose", 37.0, dose_gy=20.0),
    ClinicalCriterion("heart", "max", 66.0),
    ClinicalCriterion("heart", "mean", 20.0),
    ClinicalCriterion("heart", "vdose", 50.0, dose_gy=30.0),
    ClinicalCriterion("esophagus", "max", 66.0),
    ClinicalCriterion("esophagus", "mean", 34.0),
    ClinicalCriterion("cord", "max", 50.0),
)


def clinical_report(dose, structures: list[StructureMask],
                    criteria=DEFAULT_CLINICAL_CRITERIA,
                    max_as_d01cc: bool = False) -> list[dict]:
    """Evaluate each criterion row; structures absent from the case are
    marked not evaluable.  "max" uses the absolute voxel max by default,
    or D0.1cc when max_as_d01cc is set."""
    by_name = {s.name: s for s in structures}
    geometry = require_same_geometry(*structures) if structures else None

    rows = []
    for c in criteria:
        mask = by_name.get(c.structure)
        row = {"structure": c.structure, "criterion": c.label(),
               "limit": c.limit, "achieved": None, "pass": None, "evaluable": mask is not None}
        if mask is not None:
            d = _masked(dose, mask)
            if c.kind == "max":
                achieved = dose_at_cc(dose, mask, 0.1, geometry) if max_as_d01cc else float(d.max())
                ok = achieved <= c.limit
            elif c.kind == "mean":
                achieved = float(d.mean())
                ok = achieved <= c.limit
            elif c.kind == "vdose":
                achieved = float(np.count_nonzero(d >= c.dose_gy)) / d.size * 100.0
                ok = achieved <= c.limit
            else:
                raise DataError(f"unknown clinical criterion kind {c.kind!r}")
            row["achieved"] = achieved
            row["pass"] = bool(ok)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Combined report
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    case_id: str
    dose_score: float
    dvh_score: float
    criteria: list[dict]
    hi_ref: float
    hi_pred: float
    hi_error: float
    pci_ref: float
    pci_pred: float
    pci_error: float
    clinical: list[dict] = field(default_factory=list)
    dvh_curves: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "dose_score": self.dose_score,
            "dvh_score": self.dvh_score,
            "criteria": self.criteria,
            "hi_ref": self.hi_ref,
            "hi_pred": self.hi_pred,
            "hi_error": self.hi_error,
            "pci_ref": self.pci_ref,
            "pci_pred": self.pci_pred,
            "pci_error": self.pci_error,
            "clinical": self.clinical,
            "dvh_curves": self.dvh_curves,
        }


def compute_report(pred, ref, structures: list[StructureMask], case_id: str = "case",
                   prescription: float = 60.0, curve_bin_width: float = 1.0,
                   include_curves: bool = True) -> MetricsReport:
    """Full evaluation of a predicted dose against the reference."""
    score, rows = dvh_score(pred, ref, structures)
    ptv = next(s for s in structures if s.role == "PTV")
    hi_r = homogeneity_index(ref, ptv)
    hi_p = homogeneity_index(pred, ptv)
    pci_r = paddick_ci(ref, ptv, prescription)
    pci_p = paddick_ci(pred, ptv, prescription)

    curves = {}
    if include_curves:
        for s in structures:
            c_ref = exact_dvh_curve(ref, s, curve_bin_width)
            c_pred = exact_dvh_curve(pred, s, curve_bin_width)
            n = max(len(c_ref.edges), len(c_pred.edges))

            def pad(c):
                frac = np.zeros(n)
                frac[: len(c.fractions)] = c.fractions
                return frac

            curves[s.name] = {
                "edges": (np.arange(n) * curve_bin_width).tolist(),
                "ref": pad(c_ref).tolist(),
                "pred": pad(c_pred).tolist(),
            }

    return MetricsReport(
        case_id=case_id,
        dose_score=dose_score(pred, ref),
        dvh_score=score,
        criteria=rows,
        hi_ref=hi_r,
        hi_pred=hi_p,
        hi_error=abs(hi_p - hi_r),
        pci_ref=pci_r,
        pci_pred=pci_p,
        pci_error=abs(pci_p - pci_r),
        clinical=clinical_report(pred, structures),
        dvh_curves=curves,
    )
