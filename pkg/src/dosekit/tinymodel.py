"""Toy differentiable 3D encoder-decoder for dose prediction.

A small U-shaped conv net (conv+ReLU blocks, 2x max-pool encoder, trilinear
upsampling decoder with skip connections, 1x1x1 linear head) trained with
the package's loss functions.  The network predicts dose in prescription
units; predictions are multiplied by ``output_scale`` before the loss so
the objectives stay in Gy.

Batch normalization is deliberately absent: with batch size 1 it
degenerates, so blocks are conv-ReLU(-dropout).

Checkpoints are a single binary file: one JSON header line describing the
model and parameter layout, then the parameters concatenated as
little-endian float32.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigError, DataError, NumericalError
from .losses import LossConfig, total_loss_grad
from .metrics import compute_report, dose_score, dvh_score
from .mimic import AdamState, OptimizerConfig, adam_step, schedule_lr
from .preprocess import CANONICAL_OARS, one_hot_structures
from .volume import CaseBundle, Grid3


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 2 + len(CANONICAL_OARS)
    levels: int = 2
    base_filters: int = 8
    kernel: int = 3
    dropout: float = 0.0
    dtype: str = "float32"
    output_scale: float = 60.0

    def __post_init__(self):
        if self.levels < 1 or self.base_filters < 1:
            raise ConfigError("levels and base_filters must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def to_json(self) -> dict:
        return {
            "in_channels": self.in_channels, "levels": self.levels,
            "base_filters": self.base_filters, "kernel": self.kernel,
            "dropout": self.dropout, "dtype": self.dtype,
            "output_scale": self.output_scale,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ModelConfig":
        return cls(
            in_channels=int(doc.get("in_channels", 2 + len(CANONICAL_OARS))),
            levels=int(doc.get("levels", 2)),
            base_filters=int(doc.get("base_filters", 8)),
            kernel=int(doc.get("kernel", 3)),
            dropout=float(doc.get("dropout", 0.0)),
            dtype=doc.get("dtype", "float32"),
            output_scale=float(doc.get("output_scale", 60.0)),
        )

    @classmethod
    def load(cls, path) -> "ModelConfig":
        with open(path) as f:
            return cls.from_json(json.load(f))


def _layer_channels(cfg: ModelConfig):
    """(name, c_in, c_out) for every conv in creation order."""
    layers = []
    c_prev = cfg.in_channels
    for i in range(cfg.levels):
        c_out = cfg.base_filters * 2**i
        layers.append((f"enc{i}", c_prev, c_out))
        c_prev = c_out
    layers.append(("bottleneck", c_prev, c_prev * 2))
    c_prev = c_prev * 2
    for i in reversed(range(cfg.levels)):
        c_skip = cfg.base_filters * 2**i
        layers.append((f"dec{i}", c_prev + c_skip, c_skip))
        c_prev = c_skip
    layers.append(("head", c_prev, 1))
    return layers


def init_params(cfg: ModelConfig, seed: int = 0) -> dict:
    """He-initialized weights, zero biases; creation order is fixed so the
    same seed always yields identical parameters."""
    rng = np.random.default_rng(seed)
    dt = cfg.np_dtype
    params = {}
    for name, c_in, c_out in _layer_channels(cfg):
        k = 1 if name == "head" else cfg.kernel
        fan_in = c_in * k**3
        std = np.sqrt((1.0 if name == "head" else 2.0) / fan_in)
        params[f"{name}_w"] = (rng.standard_normal((c_out, c_in, k, k, k)) * std).astype(dt)
        params[f"{name}_b"] = np.zeros(c_out, dtype=dt)
    return params


def assemble_inputs(bundle: CaseBundle, cfg: ModelConfig) -> np.ndarray:
    """Stack CT, PTV, and one-hot OAR channels as (C, X, Y, Z)."""
    oars, _names = one_hot_structures(bundle.structures)
    # one_hot_structures returns canonical OARs then PTV last; the network
    # input convention is CT, PTV, OARs.
    ptv = oars[-1]
    channels = np.concatenate([bundle.ct.values[None], ptv[None], oars[:-1]], axis=0)
    return channels.astype(cfg.np_dtype)


def forward(params: dict, cfg: ModelConfig, x: np.ndarray,
            train: bool = False, drop_rng: np.random.Generator | None = None):
    """Run the network; returns (prediction in model units (X,Y,Z), cache)."""
    spatial = x.shape[1:]
    div = 2**cfg.levels
    if any(s % div for s in spatial):
        raise DataError(f"spatial dims {spatial} not divisible by 2^levels={div}")
    use_dropout = train and cfg.dropout > 0
    if use_dropout and drop_rng is None:
        raise ConfigError("dropout requires a generator in training mode")

    cache = {"drop": {}}
    h = x.astype(cfg.np_dtype, copy=False)
    skips = []
    for i in range(cfg.levels):
        h, cache[f"enc{i}_conv"] = nn.conv3d_forward(h, params[f"enc{i}_w"], params[f"enc{i}_b"])
        h, cache[f"enc{i}_relu"] = nn.relu_forward(h)
        if use_dropout:
            h, cache["drop"][f"enc{i}"] = nn.dropout_forward(h, cfg.dropout, drop_rng)
        skips.append(h)
        h, cache[f"pool{i}"] = nn.maxpool2_forward(h)

    h, cache["bottleneck_conv"] = nn.conv3d_forward(h, params["bottleneck_w"], params["bottleneck_b"])
    h, cache["bottleneck_relu"] = nn.relu_forward(h)
    if use_dropout:
        h, cache["drop"]["bottleneck"] = nn.dropout_forward(h, cfg.dropout, drop_rng)

    for i in reversed(range(cfg.levels)):
        h, cache[f"up{i}"] = nn.upsample2_forward(h)
        cache[f"cat{i}"] = h.shape[0]  # channels of the upsampled half
        h = np.concatenate([h, skips[i]], axis=0)
        h, cache[f"dec{i}_conv"] = nn.conv3d_forward(h, params[f"dec{i}_w"], params[f"dec{i}_b"])
        h, cache[f"dec{i}_relu"] = nn.relu_forward(h)
        if use_dropout:
            h, cache["drop"][f"dec{i}"] = nn.dropout_forward(h, cfg.dropout, drop_rng)

    y, cache["head_conv"] = nn.conv3d_forward(h, params["head_w"], params["head_b"])
    return y[0], cache


def backward(params: dict, cfg: ModelConfig, cache: dict, gy: np.ndarray) -> dict:
    """Reverse-mode gradients for every parameter given d(loss)/d(output)."""
    if "head_conv" not in cache:
        raise DataError("backward requires the cache from a forward pass")
    grads = {}
    drop = cache["drop"]

    g = gy[None].astype(cfg.np_dtype, copy=False)
    g, grads["head_w"], grads["head_b"] = nn.conv3d_backward(g, params["head_w"], cache["head_conv"])

    g_skip = {}
    for i in range(cfg.levels):
        if f"dec{i}" in drop:
            g = nn.dropout_backward(g, drop[f"dec{i}"])
        g = nn.relu_backward(g, cache[f"dec{i}_relu"])
        g, grads[f"dec{i}_w"], grads[f"dec{i}_b"] = nn.conv3d_backward(
            g, params[f"dec{i}_w"], cache[f"dec{i}_conv"])
        c_up = cache[f"cat{i}"]
        g_skip[i] = g[c_up:]
        g = nn.upsample2_backward(np.ascontiguousarray(g[:c_up]), cache[f"up{i}"])

    if "bottleneck" in drop:
        g = nn.dropout_backward(g, drop["bottleneck"])
    g = nn.relu_backward(g, cache["bottleneck_relu"])
    g, grads["bottleneck_w"], grads["bottleneck_b"] = nn.conv3d_backward(
        g, params["bottleneck_w"], cache["bottleneck_conv"])

    for i in reversed(range(cfg.levels)):
        g = nn.maxpool2_backward(g, cache[f"pool{i}"])
        g = g + g_skip[i]
        if f"enc{i}" in drop:
            g = nn.dropout_backward(g, drop[f"enc{i}"])
        g = nn.relu_backward(g, cache[f"enc{i}_relu"])
        g, grads[f"enc{i}_w"], grads[f"enc{i}_b"] = nn.conv3d_backward(
            g, params[f"enc{i}_w"], cache[f"enc{i}_conv"])
    return grads


def predict_dose(params: dict, cfg: ModelConfig, bundle: CaseBundle) -> Grid3:
    """Deterministic inference: forward pass scaled to Gy."""
    x = assemble_inputs(bundle, cfg)
    y, _ = forward(params, cfg, x, train=False)
    return Grid3(bundle.dose.geometry, np.asarray(y, dtype=np.float64) * cfg.output_scale, "Gy")


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    loss: LossConfig = LossConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    epochs: int = 40
    seed: int = 0
    prescription: float = 60.0

    def __post_init__(self):
        if self.epochs < 2 or self.epochs % 2:
            raise ConfigError(f"epochs must be even and >= 2, got {self.epochs}")


@dataclass
class TrainResult:
    params: dict
    best_params: dict
    best_epoch: int
    log: list = field(default_factory=list)


def train(
    train_cases: list[CaseBundle],
    val_cases: list[CaseBundle],
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    out_dir=None,
) -> TrainResult:
    """Batch-size-1 training with the configured loss and Adam schedule.

    Deterministic given cfg.seed (parameter init, per-epoch shuffling, and
    dropout all derive from one generator).  Keeps the checkpoint with the
    best validation DVH score."""
    if not train_cases:
        raise DataError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(model_cfg, seed=cfg.seed)
    states = {k: AdamState(v.shape, dtype=v.dtype) for k, v in params.items()}
    opt = cfg.optimizer

    inputs = [assemble_inputs(b, model_cfg) for b in train_cases]
    log = []
    best = (np.inf, 0, None)
    for epoch in range(1, cfg.epochs + 1):
        lr = schedule_lr(epoch, cfg.epochs, opt.lr)
        order = rng.permutation(len(train_cases))
        epoch_loss = 0.0
        for idx in order:
            bundle = train_cases[idx]
            y, cache = forward(params, model_cfg, inputs[idx], train=True, drop_rng=rng)
            pred = np.asarray(y, dtype=np.float64) * model_cfg.output_scale
            out = total_loss_grad(pred, bundle.dose.values, bundle.structures, cfg.loss)
            if not np.isfinite(out.value):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, case {bundle.case_id}")
            gy = (out.grad * model_cfg.output_scale).astype(model_cfg.np_dtype)
            grads = backward(params, model_cfg, cache, gy)
            for name, p in params.items():
                adam_step(p, grads[name], states[name], lr, opt, project_nonneg=False)
            epoch_loss += out.value

        entry = {"epoch": epoch, "lr": lr, "train_loss": epoch_loss / len(train_cases)}
        if val_cases:
            ds, vs = _score_cases(params, model_cfg, val_cases)
            entry["val_dose_score"] = ds
            entry["val_dvh_score"] = vs
            if vs < best[0]:
                best = (vs, epoch, {k: v.copy() for k, v in params.items()})
        log.append(entry)

    if best[2] is None:
        best = (np.inf, cfg.epochs, {k: v.copy() for k, v in params.items()})

    result = TrainResult(params=params, best_params=best[2], best_epoch=best[1], log=log)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "train_log.jsonl", "w") as f:
            for entry in log:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        save_checkpoint(out_dir / "final.ckpt", params, model_cfg)
        save_checkpoint(out_dir / "best.ckpt", best[2], model_cfg)
    return result


def _score_cases(params, model_cfg, cases):
    ds, vs = [], []
    for b in cases:
        pred = predict_dose(params, model_cfg, b)
        ds.append(dose_score(pred, b.dose))
        vs.append(dvh_score(pred, b.dose, b.structures)[0])
    return float(np.mean(ds)), float(np.mean(vs))


def evaluate_holdout(params: dict, model_cfg: ModelConfig, cases: list[CaseBundle],
                     prescription: float = 60.0) -> dict:
    """Per-case MetricsReport on a held-out split plus mean scores."""
    if not cases:
        raise DataError("empty test set")
    reports = []
    for b in cases:
        pred = predict_dose(params, model_cfg, b)
        reports.append(compute_report(pred, b.dose, b.structures, case_id=b.case_id,
                                      prescription=prescription, include_curves=False))
    return {
        "reports": reports,
        "mean_dose_score": float(np.mean([r.dose_score for r in reports])),
        "mean_dvh_score": float(np.mean([r.dvh_score for r in reports])),
    }


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: dict, cfg: ModelConfig) -> None:
    names = sorted(params)
    header = {
        "format": "dosekit-ckpt-1",
        "model": cfg.to_json(),
        "dtype": "f32le",
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for n in names:
            f.write(np.ascontiguousarray(params[n], dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[dict, ModelConfig]:
    with open(path, "rb") as f:
        header = json.loads(f.readline())
        if header.get("format") != "dosekit-ckpt-1":
            raise DataError(f"{path}: not a dosekit checkpoint")
        cfg = ModelConfig.from_json(header["model"])
        params = {}
        for entry in header["params"]:
            count = int(np.prod(entry["shape"]))
            blob = f.read(count * 4)
            if len(blob) != count * 4:
                raise DataError(f"{path}: truncated parameter blob")
            params[entry["name"]] = (
                np.frombuffer(blob, dtype="<f4").reshape(entry["shape"]).astype(cfg.np_dtype)
            )
    return params, cfg
