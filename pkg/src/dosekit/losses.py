"""Differentiable dose-distribution objectives with analytic gradients.

Three loss families over a predicted dose grid versus a reference:

- voxel-wise mean absolute error,
      L = (1/N) sum_i |pred_i - ref_i|
- sigmoid-smoothed DVH mismatch: the volume fraction of structure s at
  threshold t is approximated by
      v_{s,t} = sum_i sigmoid((D(i) - d_t)/beta) B_s(i) / sum_i B_s(i)
  and the loss is the MSE between the reference and predicted DVH vectors,
      L = (1/(n_s n_t)) sum_s || DVH(ref, s) - DVH(pred, s) ||^2
- moment mismatch: with the order-p power mean of structure dose
      M_p = ((1/|V_s|) sum_{j in V_s} d_j^p)^(1/p)
  the loss is
      L = sum_s sum_{p in P_s} (M_p(ref, s) - M_p(pred, s))^2.

All losses treat the reference as constant: gradients are with respect to
the predicted dose only.  Reductions are float64 and sequential, so repeated
evaluations are bit-identical on one platform.

Power means are evaluated in max-normalized form,
``M_p = m * (mean((d/m)^p))^(1/p)`` with ``m = max(d)``, which keeps d^10
well inside float range at clinical dose scales.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, GeometryError
from .volume import Grid3, StructureMask, require_same_geometry

MOMENT_EPS = 1e-9  # below this the power mean sits at the cone apex; grad := 0

TERM_MAE = "mae"
TERM_DVH = "dvh"
TERM_MOMENT = "moment"
ALL_TERMS = (TERM_MAE, TERM_DVH, TERM_MOMENT)


@dataclass(frozen=True)
class DvhLossSpec:
    """Threshold grid and sigmoid width for the smoothed DVH."""

    thresholds: tuple[float, ...] = tuple(np.linspace(0.0, 70.0, 60))
    beta: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0):
            raise ConfigError("thresholds must be non-empty and strictly increasing")
        if not self.beta > 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        object.__setattr__(self, "thresholds", tuple(float(v) for v in t))

    @classmethod
    def uniform(cls, count: int = 60, lo: float = 0.0, hi: float = 70.0, beta: float = 1.0):
        return cls(thresholds=tuple(np.linspace(lo, hi, count)), beta=beta)


@dataclass(frozen=True)
class MomentSpec:
    """Moment orders per structure; structures not listed use the default set."""

    default_orders: tuple[int, ...] = (1, 2, 10)
    per_structure: dict = field(default_factory=dict)
    skip_missing: bool = False  # structure named here but absent from the case

    def __post_init__(self):
        for name, orders in [("default", self.default_orders)] + list(self.per_structure.items()):
            arr = tuple(int(p) for p in orders)
            if any(p < 1 for p in arr) or any(b <= a for a, b in zip(arr, arr[1:])):
                raise ConfigError(
                    f"moment orders for {name!r} must be strictly increasing positive "
                    f"integers, got {orders}"
                )
        object.__setattr__(self, "default_orders", tuple(int(p) for p in self.default_orders))
        object.__setattr__(
            self, "per_structure",
            {k: tuple(int(p) for p in v) for k, v in self.per_structure.items()},
        )

    def orders_for(self, name: str) -> tuple[int, ...]:
        return self.per_structure.get(name, self.default_orders)


@dataclass(frozen=True)
class LossConfig:
    """Weighted combination of the enabled loss terms."""

    terms: tuple[str, ...] = (TERM_MAE,)
    w_dvh: float = 10.0
    w_moment: float = 0.01
    dvh: DvhLossSpec = DvhLossSpec()
    moments: MomentSpec = MomentSpec()

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ConfigError("at least one loss term must be enabled")
        for t in terms:
            if t not in ALL_TERMS:
                raise ConfigError(f"unknown loss term {t!r}, expected one of {ALL_TERMS}")
        if self.w_dvh < 0 or self.w_moment < 0:
            raise ConfigError("term weights must be nonnegative")
        object.__setattr__(self, "terms", terms)

    def weight(self, term: str) -> float:
        if term == TERM_MAE:
            return 1.0
        return self.w_dvh if term == TERM_DVH else self.w_moment

    def to_json(self) -> dict:
        return {
            "terms": list(self.terms),
            "w_dvh": self.w_dvh,
            "w_moment": self.w_moment,
            "dvh": {"thresholds": list(self.dvh.thresholds), "beta": self.dvh.beta},
            "moments": {
                "default": list(self.moments.default_orders),
                "per_structure": {k: list(v) for k, v in self.moments.per_structure.items()},
                "skip_missing": self.moments.skip_missing,
            },
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LossConfig":
        dvh_doc = doc.get("dvh", {})
        if "thresholds" in dvh_doc:
            dvh = DvhLossSpec(thresholds=tuple(dvh_doc["thresholds"]),
                              beta=float(dvh_doc.get("beta", 1.0)))
        else:
            dvh = DvhLossSpec.uniform(
                count=int(dvh_doc.get("count", 60)),
                lo=float(dvh_doc.get("lo", 0.0)),
                hi=float(dvh_doc.get("hi", 70.0)),
                beta=float(dvh_doc.get("beta", 1.0)),
            )
        m_doc = doc.get("moments", {})
        moments = MomentSpec(
            default_orders=tuple(m_doc.get("default", (1, 2, 10))),
            per_structure={k: tuple(v) for k, v in m_doc.get("per_structure", {}).items()},
            skip_missing=bool(m_doc.get("skip_missing", False)),
        )
        return cls(
            terms=tuple(doc.get("terms", (TERM_MAE,))),
            w_dvh=float(doc.get("w_dvh", 10.0)),
            w_moment=float(doc.get("w_moment", 0.01)),
            dvh=dvh,
            moments=moments,
        )

    @classmethod
    def load(cls, path) -> "LossConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))


@dataclass
class LossValueGrad:
    """Scalar loss, per-voxel gradient, and unweighted term breakdown."""

    value: float
    grad: np.ndarray
    breakdown: dict = field(default_factory=dict)


def _as_values(grid) -> np.ndarray:
    return grid.values if isinstance(grid, Grid3) else np.asarray(grid)


def _check_same_shape(pred, ref):
    p, r = _as_values(pred), _as_values(ref)
    if p.shape != r.shape:
        raise GeometryError(f"pred/ref shape mismatch: {p.shape} vs {r.shape}")
    return np.asarray(p, dtype=np.float64), np.asarray(r, dtype=np.float64)


# ---------------------------------------------------------------------------
# MAE
# ---------------------------------------------------------------------------

def mae_loss_grad(pred, ref) -> LossValueGrad:
    """Mean absolute voxel error; grad_i = sign(pred_i - ref_i)/N, sign(0)=0."""
    p, r = _check_same_shape(pred, ref)
    diff = p - r
    n = diff.size
    value = float(np.sum(np.abs(diff)) / n)
    grad = np.sign(diff) / n
    return LossValueGrad(value, grad, {TERM_MAE: value})


# ---------------------------------------------------------------------------
# Sigmoid DVH
# ---------------------------------------------------------------------------

def sigmoid_volume_at_dose(dose, mask: StructureMask, d_t: float, beta: float) -> tuple[float, np.ndarray]:
    """Smoothed volume-at-dose and its gradient with respect to the dose grid."""
    d = _as_values(dose)
    if mask.voxel_count == 0:
        raise DataError(f"structure {mask.name!r} is empty")
    if not beta > 0:
        raise ConfigError("beta must be > 0")
    md = np.asarray(d[mask.bits], dtype=np.float64)
    s = expit((md - d_t) / beta)
    value = float(np.sum(s) / md.size)
    grad = np.zeros(d.shape, dtype=np.float64)
    grad[mask.bits] = s * (1.0 - s) / (beta * md.size)
    return value, grad


def dvh_vector_approx(dose, mask: StructureMask, spec: DvhLossSpec) -> np.ndarray:
    """Smoothed DVH vector: one volume fraction per threshold, nonincreasing."""
    d = _as_values(dose)
    if mask.voxel_count == 0:
        raise DataError(f"structure {mask.name!r} is empty")
    md = np.asarray(d[mask.bits], dtype=np.float64)
    t = np.asarray(spec.thresholds)
    s = expit((md[:, None] - t[None, :]) / spec.beta)
    return s.sum(axis=0) / md.size


def dvh_loss_grad(pred, ref, structures: list[StructureMask], spec: DvhLossSpec) -> LossValueGrad:
    """MSE between reference and predicted smoothed DVH vectors."""
    p, r = _check_same_shape(pred, ref)
    if not structures:
        raise DataError("dvh loss needs at least one structure")
    t = np.asarray(spec.thresholds)
    n_s, n_t = len(structures), t.size
    norm = 1.0 / (n_s * n_t)

    value = 0.0
    grad = np.zeros(p.shape, dtype=np.float64)
    for s in structures:
        if s.voxel_count == 0:
            raise DataError(f"structure {s.name!r} is empty")
        mp = p[s.bits]
        mr = r[s.bits]
        sp = expit((mp[:, None] - t[None, :]) / spec.beta)
        v_pred = sp.sum(axis=0) / mp.size
        v_ref = expit((mr[:, None] - t[None, :]) / spec.beta).sum(axis=0) / mr.size
        diff = v_ref - v_pred
        value += float(diff @ diff)
        # d v_pred,t / d pred_j = sigmoid'((pred_j - d_t)/beta) / (beta |V_s|)
        w = (-2.0 * norm) * diff / (spec.beta * mp.size)
        grad[s.bits] += (sp * (1.0 - sp)) @ w
    value *= norm
    return LossValueGrad(value, grad, {TERM_DVH: value})


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def _moment_core(md: np.ndarray, p: int) -> tuple[float, np.ndarray]:
    """Power mean of a nonnegative 1-D dose vector and per-entry gradient."""
    m = float(np.max(md))
    if m < MOMENT_EPS:
        return 0.0, np.zeros(md.shape)
    ratio = md / m
    q = float(np.mean(ratio**p))
    value = m * q ** (1.0 / p)
    if value < MOMENT_EPS:
        return value, np.zeros(md.shape)
    # d_j^(p-1) M^(1-p) == ratio^(p-1) * q^((1-p)/p)
    return value, ratio ** (p - 1) * q ** ((1.0 - p) / p) / md.size


def moment(dose, mask: StructureMask, p: int) -> tuple[float, np.ndarray]:
    """Order-p power mean of structure dose and its gradient.

    grad_j = (1/|V_s|) d_j^(p-1) M_p^(1-p) for masked voxels, computed in
    max-normalized form.  When M_p falls below MOMENT_EPS the gradient is
    defined as 0 (subgradient at the cone apex).
    """
    d = _as_values(dose)
    if mask.voxel_count == 0:
        raise DataError(f"structure {mask.name!r} is empty")
    if p < 1:
        raise ConfigError(f"moment order must be >= 1, got {p}")
    md = np.asarray(d[mask.bits], dtype=np.float64)
    if np.any(md < 0):
        raise DataError(f"negative dose in structure {mask.name!r}")
    value, g = _moment_core(md, p)
    grad = np.zeros(d.shape, dtype=np.float64)
    grad[mask.bits] = g
    return value, grad


def moment_loss_grad(pred, ref, structures: list[StructureMask], spec: MomentSpec) -> LossValueGrad:
    """Squared mismatch of reference vs predicted moments, summed over
    structures and their configured orders.

    Negative predicted values (untrained networks) are treated as zero dose
    with zero subgradient: M_p(max(d, 0)) stays convex because M_p is
    nondecreasing in every coordinate.
    """
    p_arr, r_arr = _check_same_shape(pred, ref)
    present = {s.name for s in structures}
    missing = [name for name in spec.per_structure if name not in present]
    if missing and not spec.skip_missing:
        raise ConfigError(f"moment spec names absent structures: {missing}")

    value = 0.0
    grad = np.zeros(p_arr.shape, dtype=np.float64)
    for s in structures:
        if s.voxel_count == 0:
            raise DataError(f"structure {s.name!r} is empty")
        mp = np.maximum(p_arr[s.bits], 0.0)
        alive = p_arr[s.bits] >= 0.0
        mr = np.maximum(r_arr[s.bits], 0.0)
        for order in spec.orders_for(s.name):
            m_ref, _ = _moment_core(mr, order)
            m_pred, g_pred = _moment_core(mp, order)
            delta = m_pred - m_ref
            value += delta * delta
            grad[s.bits] += (2.0 * delta) * g_pred * alive
    return LossValueGrad(float(value), grad, {TERM_MOMENT: float(value)})


# ---------------------------------------------------------------------------
# Combined loss
# ---------------------------------------------------------------------------

def total_loss_grad(pred, ref, structures: list[StructureMask], cfg: LossConfig) -> LossValueGrad:
    """Weighted sum of the enabled terms.

    Terms with weight exactly 0 still contribute their value to the
    breakdown but are skipped during gradient accumulation, so e.g.
    MAE+moment with w_moment=0 yields a gradient bit-identical to MAE alone.
    """
    p, r = _check_same_shape(pred, ref)
    if isinstance(pred, Grid3) and structures:
        require_same_geometry(pred, *structures)

    value = 0.0
    grad = np.zeros(p.shape, dtype=np.float64)
    breakdown = {}
    for term in cfg.terms:
        if term == TERM_MAE:
            part = mae_loss_grad(p, r)
        elif term == TERM_DVH:
            part = dvh_loss_grad(p, r, structures, cfg.dvh)
        else:
            part = moment_loss_grad(p, r, structures, cfg.moments)
        w = cfg.weight(term)
        breakdown[term] = part.value
        if w != 0.0:
            value += w * part.value
            grad += w * part.grad
    return LossValueGrad(float(value), grad, breakdown)


# ---------------------------------------------------------------------------
# Finite-difference gradient check
# ---------------------------------------------------------------------------

def finite_difference_gradcheck(
    loss_fn,
    pred,
    h: float = 1e-4,
    samples: int = 32,
    seed: int = 0,
) -> float:
    """Compare an analytic gradient against central differences.

    ``loss_fn(values) -> LossValueGrad`` is evaluated at ``pred`` and at
    +/- h single-voxel perturbations of ``samples`` randomly chosen voxels.
    Returns the max relative error with denominator
    max(|analytic|, |numeric|, 1e-12).
    """
    base = np.array(_as_values(pred), dtype=np.float64, copy=True)
    analytic = loss_fn(base).grad
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(base.size, size=min(samples, base.size), replace=False)

    max_rel = 0.0
    work = base.ravel()
    for j in flat_idx:
        orig = work[j]
        work[j] = orig + h
        f_plus = loss_fn(base).value
        work[j] = orig - h
        f_minus = loss_fn(base).value
        work[j] = orig
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic.ravel()[j]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
        max_rel = max(max_rel, rel)
    return max_rel
