"""Voxel-level dose mimicking and loss-landscape probes.

``mimic_dose`` treats every voxel dose as a free variable and minimizes a
LossConfig against a reference dose with Adam (bias-corrected, nonnegative
projection, constant-then-linear-decay learning rate).  Optimizing raw
voxels rather than fluence isolates the loss functions themselves.

``restart_study`` measures the dispersion of final losses across seeded
random initializations; ``midpoint_convexity_probe`` samples midpoint
convexity violations of any scalar dose functional.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DivergenceError, NumericalError
from .losses import LossConfig, total_loss_grad
from .metrics import dose_score, dvh_score
from .volume import CaseBundle, Grid3

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 100


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam hyperparameters with the constant-then-linear-decay schedule."""

    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    iterations: int = 2000
    eps: float = 1e-8
    project_nonneg: bool = True

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must satisfy 0 <= beta < 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")

    def to_json(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "iterations": self.iterations, "eps": self.eps,
                "project_nonneg": self.project_nonneg}

    @classmethod
    def from_json(cls, doc: dict) -> "OptimizerConfig":
        return cls(
            lr=float(doc.get("lr", 2e-4)),
            beta1=float(doc.get("beta1", 0.5)),
            beta2=float(doc.get("beta2", 0.999)),
            iterations=int(doc.get("iterations", 2000)),
            eps=float(doc.get("eps", 1e-8)),
            project_nonneg=bool(doc.get("project_nonneg", True)),
        )

    @classmethod
    def load(cls, path) -> "OptimizerConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))


def schedule_lr(step: int, total: int, base: float) -> float:
    """Constant for the first half of the run, then linear decay to 0.

    ``step`` is 1-based.  With total = 2N this is: base for step <= N,
    base*(2N - step)/N afterwards, reaching exactly 0 at the last step.
    """
    if not 1 <= step <= total:
        raise ConfigError(f"step {step} outside 1..{total}")
    half = max(1, total // 2)
    if step <= half:
        return base
    return base * (total - step) / (total - half)


class AdamState:
    """First/second moment accumulators for one variable tensor."""

    def __init__(self, shape, dtype=np.float64):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.t = 0


def adam_step(x: np.ndarray, grad: np.ndarray, state: AdamState, lr: float,
              cfg: OptimizerConfig, project_nonneg: bool | None = None) -> np.ndarray:
    """One in-place Adam update with bias correction.

    Projection to x >= 0 is applied when enabled (dose variables); parameter
    optimization passes project_nonneg=False.
    """
    if x.shape != grad.shape:
        raise DataError(f"state/grad shape mismatch: {x.shape} vs {grad.shape}")
    if np.isnan(grad).any():
        raise NumericalError(f"NaN in gradient at step {state.t + 1}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    state.m += (1.0 - b1) * (grad - state.m)
    state.v += (1.0 - b2) * (grad * grad - state.v)
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    x -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    project = cfg.project_nonneg if project_nonneg is None else project_nonneg
    if project:
        np.maximum(x, 0.0, out=x)
    return x


# ---------------------------------------------------------------------------
# Dose mimicking
# ---------------------------------------------------------------------------

@dataclass
class MimicResult:
    final_dose: Grid3
    trajectory: list = field(default_factory=list)  # per-iteration {total, <term>...}
    restart_id: int = 0
    init: str = "zeros"
    timing: dict = field(default_factory=dict)      # wall-clock stats, not replayable

    @property
    def final_loss(self) -> float:
        return self.trajectory[-1]["total"]

    def to_json(self) -> dict:
        """Deterministic payload (timing intentionally excluded)."""
        return {
            "init": self.init,
            "restart_id": self.restart_id,
            "iterations": len(self.trajectory),
            "final_loss": self.final_loss,
            "trajectory": self.trajectory,
        }


def init_dose(kind: str, ref: Grid3, prescription: float = 60.0) -> np.ndarray:
    """Build the starting dose variables: zeros, uniform:<gy>, or rand:<seed>."""
    if kind == "zeros":
        return np.zeros(ref.geometry.dims, dtype=np.float64)
    if kind.startswith("uniform:"):
        level = float(kind.split(":", 1)[1])
        return np.full(ref.geometry.dims, level, dtype=np.float64)
    if kind.startswith("rand:"):
        seed = int(kind.split(":", 1)[1])
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 1.2 * prescription, size=ref.geometry.dims)
    raise ConfigError(f"unknown init {kind!r}, expected zeros|uniform:<gy>|rand:<seed>")


def mimic_dose(
    bundle: CaseBundle,
    loss_cfg: LossConfig,
    opt_cfg: OptimizerConfig,
    init: str = "zeros",
    restart_id: int = 0,
) -> MimicResult:
    """Minimize the configured loss over free voxel doses against the
    reference dose of a (preprocessed) case."""
    ref = bundle.dose
    x = init_dose(init, ref)
    state = AdamState(x.shape)
    total = opt_cfg.iterations

    trajectory = []
    times = []
    diverged_for = 0
    threshold = None
    for step in range(1, total + 1):
        t0 = time.perf_counter()
        out = total_loss_grad(x, ref.values, bundle.structures, loss_cfg)
        lr = schedule_lr(step, total, opt_cfg.lr)
        adam_step(x, out.grad, state, lr, opt_cfg)
        times.append(time.perf_counter() - t0)

        entry = {"total": out.value}
        entry.update(out.breakdown)
        trajectory.append(entry)
        if threshold is None:
            threshold = DIVERGENCE_FACTOR * out.value + 1e-6
        diverged_for = diverged_for + 1 if out.value > threshold else 0
        if diverged_for >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"loss above {threshold:.3g} for {DIVERGENCE_PATIENCE} consecutive "
                f"iterations (step {step})"
            )

    timing = {
        "iterations": total,
        "mean_s": float(np.mean(times)),
        "std_s": float(np.std(times)),
        "total_s": float(np.sum(times)),
    }
    final = Grid3(ref.geometry, x, "Gy")
    return MimicResult(final_dose=final, trajectory=trajectory,
                       restart_id=restart_id, init=init, timing=timing)


def restart_study(
    bundle: CaseBundle,
    loss_cfg: LossConfig,
    opt_cfg: OptimizerConfig,
    seeds: list[int],
) -> dict:
    """Run mimic_dose from several seeded random inits and report the spread
    of final losses and final DVH scores."""
    if len(seeds) < 2:
        raise ConfigError("restart study needs at least 2 seeds")
    restarts = []
    for i, seed in enumerate(seeds):
        res = mimic_dose(bundle, loss_cfg, opt_cfg, init=f"rand:{seed}", restart_id=i)
        ds = dose_score(res.final_dose, bundle.dose)
        vs, _rows = dvh_score(res.final_dose, bundle.dose, bundle.structures)
        restarts.append({
            "seed": seed,
            "final_loss": res.final_loss,
            "dose_score": ds,
            "dvh_score": vs,
            "trajectory": [e["total"] for e in res.trajectory],
        })

    def spread(key):
        vals = np.array([r[key] for r in restarts])
        pair = np.abs(vals[:, None] - vals[None, :])
        return {"min": float(vals.min()), "max": float(vals.max()),
                "spread": float(vals.max() - vals.min()),
                "mean_pairwise": float(pair[np.triu_indices(len(vals), k=1)].mean())}

    return {
        "seeds": list(seeds),
        "restarts": restarts,
        "final_loss": spread("final_loss"),
        "dvh_score": spread("dvh_score"),
    }


# ---------------------------------------------------------------------------
# Convexity probe and per-iteration cost
# ---------------------------------------------------------------------------

def midpoint_convexity_probe(
    fn,
    shape,
    n_pairs: int = 1000,
    seed: int = 0,
    lo: float = 0.0,
    hi: float = 70.0,
    extra_pairs=(),
    tol: float = 1e-9,
) -> dict:
    """Count violations of fn((x+y)/2) <= (fn(x)+fn(y))/2 + tol over random
    nonnegative dose pairs, plus any explicitly constructed pairs."""
    rng = np.random.default_rng(seed)
    violations = 0
    max_violation = 0.0
    checked = 0
    for k in range(n_pairs):
        x = rng.uniform(lo, hi, size=shape)
        y = rng.uniform(lo, hi, size=shape)
        gap = fn((x + y) / 2.0) - 0.5 * (fn(x) + fn(y))
        checked += 1
        if gap > tol:
            violations += 1
            max_violation = max(max_violation, float(gap))
    for x, y in extra_pairs:
        gap = fn((np.asarray(x) + np.asarray(y)) / 2.0) - 0.5 * (fn(x) + fn(y))
        checked += 1
        if gap > tol:
            violations += 1
            max_violation = max(max_violation, float(gap))
    return {"pairs": checked, "violations": violations,
            "max_violation": max_violation, "tol": tol}


def benchmark_loss_iteration(bundle: CaseBundle, loss_cfg: LossConfig,
                             repeats: int = 30, warmup: int = 3) -> float:
    """Median wall-clock seconds of one loss+gradient evaluation."""
    pred = np.maximum(bundle.dose.values * 0.9 - 1.0, 0.0)
    for _ in range(warmup):
        total_loss_grad(pred, bundle.dose.values, bundle.structures, loss_cfg)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        total_loss_grad(pred, bundle.dose.values, bundle.structures, loss_cfg)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))
