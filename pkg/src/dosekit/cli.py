"""Command-line interface.

Subcommands: phantom, preprocess, losses, gradcheck, mimic, probe, train,
predict, eval, report.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure (NaN/divergence).

Every artifact-producing command writes a run manifest next to its outputs;
data payloads carry no timestamps, so replaying the recorded argv
reproduces them bit-exactly on one platform.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .losses import (
    LossConfig,
    dvh_loss_grad,
    finite_difference_gradcheck,
    mae_loss_grad,
    moment,
    moment_loss_grad,
    total_loss_grad,
)
from .manifest import build_manifest, manifest_path_for, write_manifest
from .metrics import compute_report
from .mimic import (
    OptimizerConfig,
    benchmark_loss_iteration,
    midpoint_convexity_probe,
    mimic_dose,
    restart_study,
)
from .mvol import load_case, read_grid, write_grid
from .phantom import generate_dataset
from .preprocess import PreprocessConfig, prepare_case
from .tinymodel import (
    ModelConfig,
    TrainConfig,
    evaluate_holdout,
    load_checkpoint,
    predict_dose,
    train,
)
from .volume import CaseBundle, Grid3, StructureMask

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _triple(text: str) -> tuple[int, int, int]:
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    return tuple(parts)


def _default_seed() -> int:
    return int(os.environ.get("DOSEKIT_SEED", "0"))


def _dump_json(path, doc) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_loss(path) -> LossConfig:
    return LossConfig.load(path) if path else LossConfig()


def _load_opt(path, **overrides) -> OptimizerConfig:
    cfg = OptimizerConfig.load(path) if path else OptimizerConfig()
    if overrides:
        doc = cfg.to_json()
        doc.update(overrides)
        cfg = OptimizerConfig.from_json(doc)
    return cfg


def build_parser() -> _Parser:
    parser = _Parser(prog="dosekit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dosekit {__version__}")
    parser.add_argument("--threads", type=int, default=0,
                        help="limit BLAS threads (0 = automatic)")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate synthetic cases")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dims", type=_triple, default=(32, 32, 32))
    p.add_argument("--out", required=True)
    p.add_argument("--split", type=_triple, default=None)

    p = sub.add_parser("preprocess", help="run the input pipeline on a case")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--crop", type=_triple, default=(300, 300, 128))
    p.add_argument("--net", type=_triple, default=(128, 128, 128))
    p.add_argument("--rx", type=float, default=60.0)

    p = sub.add_parser("losses", help="evaluate the configured losses on a case")
    p.add_argument("--case", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", default=None, help="defaults to the case reference dose")
    p.add_argument("--loss", default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gradcheck", help="finite-difference check of analytic gradients")
    p.add_argument("--loss", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dims", type=int, default=16)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--out", default=None)

    p = sub.add_parser("mimic", help="optimize voxel doses against a reference")
    p.add_argument("--case", required=True)
    p.add_argument("--loss", default=None)
    p.add_argument("--opt", default=None)
    p.add_argument("--init", default="zeros", help="zeros|uniform:<gy>|rand:<seed>")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--dose", default=None)

    p = sub.add_parser("probe", help="convexity / restart / cost studies")
    p.add_argument("--kind", choices=("convexity", "restart", "cost"), required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--fn", default="moment:10",
                   help="convexity target: mae|dvh|moment:<p> (convexity only)")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--loss", default=None)
    p.add_argument("--opt", default=None)
    p.add_argument("--seeds", default="1,2,3,4,5", help="restart seeds")
    p.add_argument("--out", default=None)

    p = sub.add_parser("train", help="train the toy dose predictor")
    p.add_argument("--data", required=True, help="dataset manifest.json")
    p.add_argument("--loss", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--opt", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--rx", type=float, default=60.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="predict a dose volume from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="score a predicted dose against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--rx", type=float, default=60.0)

    p = sub.add_parser("report", help="aggregate metrics reports across runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default=None, help="aggregated CSV path")
    p.add_argument("--json", dest="json_out", default=None, help="plot-data JSON path")
    p.add_argument("--rx", type=float, default=60.0)
    return parser


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _cmd_phantom(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    started = time.perf_counter()
    manifest = generate_dataset(args.n, seed, args.out, dims=args.dims, split=args.split)
    write_manifest(Path(args.out) / "run_manifest.json", build_manifest(
        "phantom", argv,
        {"n": args.n, "dims": list(args.dims), "split": manifest["split_counts"]},
        seeds={"base_seed": seed},
        timing={"total_s": time.perf_counter() - started},
    ))
    print(f"wrote {args.n} case(s) to {args.out} "
          f"(split {manifest['split_counts']})")
    return EXIT_OK


def _cmd_preprocess(args, argv) -> int:
    cfg = PreprocessConfig(crop_size=args.crop, net_dims=args.net, prescription=args.rx)
    bundle = load_case(args.in_dir)
    started = time.perf_counter()
    out = prepare_case(bundle, cfg)
    from .mvol import save_case

    save_case(args.out, out)
    write_manifest(Path(args.out) / "run_manifest.json", build_manifest(
        "preprocess", argv,
        {"crop": list(args.crop), "net": list(args.net), "rx": args.rx},
        timing={"total_s": time.perf_counter() - started},
    ))
    print(f"preprocessed {bundle.case_id} -> {args.out} (dims {out.ct.geometry.dims})")
    return EXIT_OK


def _cmd_losses(args, argv) -> int:
    bundle = load_case(args.case)
    pred = read_grid(args.pred)
    ref = read_grid(args.ref) if args.ref else bundle.dose
    cfg = _load_loss(args.loss)
    out = total_loss_grad(pred, ref, bundle.structures, cfg)
    doc = {
        "case_id": bundle.case_id,
        "terms": out.breakdown,
        "weights": {t: cfg.weight(t) for t in cfg.terms},
        "total": out.value,
        "grad_max_abs": float(np.max(np.abs(out.grad))),
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out:
        _dump_json(args.out, doc)
        write_manifest(manifest_path_for(args.out), build_manifest(
            "losses", argv, cfg.to_json()))
    return EXIT_OK


def _gradcheck_instance(dims: int, seed: int):
    """Random masked 16^3-style instance; doses kept away from 0 and ties."""
    rng = np.random.default_rng(seed)
    shape = (dims, dims, dims)
    ref = rng.uniform(10.0, 65.0, size=shape)
    pred = ref + rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.5, 4.0, size=shape)
    pred = np.maximum(pred, 5.0)
    geom_bits = rng.random(shape) < 0.4
    if not geom_bits.any():
        geom_bits[0, 0, 0] = True
    from .volume import GridGeometry

    geom = GridGeometry(shape, (8.0, 8.0, 8.0))
    mask = StructureMask(geom, geom_bits, "s0", "PTV")
    return pred, ref, [mask]


def run_gradcheck(loss_cfg: LossConfig, seed: int, dims: int = 16,
                  samples: int = 32, h: float = 1e-4, instances: int = 1) -> list[dict]:
    """Gradcheck every enabled term on seeded random instances."""
    results = []
    for term in loss_cfg.terms:
        worst = 0.0
        for i in range(instances):
            pred, ref, masks = _gradcheck_instance(dims, seed + 1000 * i)
            if term == "mae":
                fn = lambda d: mae_loss_grad(d, ref)
            elif term == "dvh":
                fn = lambda d: dvh_loss_grad(d, ref, masks, loss_cfg.dvh)
            else:
                fn = lambda d: moment_loss_grad(d, ref, masks, loss_cfg.moments)
            err = finite_difference_gradcheck(fn, pred, h=h, samples=samples,
                                              seed=seed + 1000 * i)
            worst = max(worst, err)
        results.append({"term": term, "max_rel_err": worst, "samples": samples,
                        "h": h, "seed": seed, "instances": instances})
    return results


def _cmd_gradcheck(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = _load_loss(args.loss)
    if args.loss is None:
        cfg = LossConfig(terms=("mae", "dvh", "moment"))
    results = run_gradcheck(cfg, seed, dims=args.dims, samples=args.samples, h=args.h)
    doc = {"checks": results}
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out:
        _dump_json(args.out, doc)
        write_manifest(manifest_path_for(args.out), build_manifest(
            "gradcheck", argv, cfg.to_json(), seeds={"seed": seed}))
    return EXIT_OK


def _cmd_mimic(args, argv) -> int:
    bundle = load_case(args.case)
    loss_cfg = _load_loss(args.loss)
    if args.loss is None:
        loss_cfg = LossConfig(terms=("mae", "moment"))
    overrides = {}
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.lr is not None:
        overrides["lr"] = args.lr
    opt_cfg = _load_opt(args.opt, **overrides)

    result = mimic_dose(bundle, loss_cfg, opt_cfg, init=args.init)
    payload = result.to_json()
    print(f"final loss {result.final_loss:.6g} after {opt_cfg.iterations} iterations "
          f"({result.timing['mean_s'] * 1e3:.2f} ms/iter)")
    if args.out:
        _dump_json(args.out, payload)
        write_manifest(manifest_path_for(args.out), build_manifest(
            "mimic", argv,
            {"loss": loss_cfg.to_json(), "opt": opt_cfg.to_json(), "init": args.init},
            timing=result.timing))
    if args.dose:
        write_grid(args.dose, result.final_dose)
    return EXIT_OK


def _probe_fn(spec: str, bundle: CaseBundle):
    """Scalar dose functional for the convexity probe."""
    structures = bundle.structures
    mask = structures[0]
    ref = bundle.dose.values
    if spec == "mae":
        return lambda d: mae_loss_grad(d, ref).value
    if spec == "dvh":
        cfg = LossConfig(terms=("dvh",))
        return lambda d: dvh_loss_grad(d, ref, structures, cfg.dvh).value
    if spec.startswith("moment:"):
        p = int(spec.split(":", 1)[1])
        return lambda d: moment(d, mask, p)[0]
    raise ConfigError(f"unknown probe fn {spec!r}")


def dvh_straddle_pairs(d_t: float = 30.0, beta: float = 1.0, shape=(1,)):
    """Dose pairs on the flat side of a sigmoid threshold; the squared
    sigmoid mismatch is concave there, so they witness non-convexity."""
    pairs = []
    for a, b in ((6.0, 18.0), (5.0, 12.0), (8.0, 20.0)):
        x = np.full(shape, d_t + a * beta)
        y = np.full(shape, d_t + b * beta)
        pairs.append((x, y))
    return pairs


def _cmd_probe(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    bundle = load_case(args.case)
    if args.kind == "convexity":
        fn = _probe_fn(args.fn, bundle)
        extra = []
        if args.fn == "dvh":
            # threshold-straddling construction on the first structure
            mask = bundle.structures[0].bits
            t0 = _load_loss(args.loss).dvh.thresholds[0] if args.loss else 30.0
            for x1, y1 in dvh_straddle_pairs(d_t=max(t0, 30.0), shape=(1,)):
                x = np.array(bundle.dose.values)
                y = np.array(bundle.dose.values)
                x[mask] = x1[0]
                y[mask] = y1[0]
                extra.append((x, y))
        doc = midpoint_convexity_probe(fn, bundle.dose.geometry.dims,
                                       n_pairs=args.pairs, seed=seed, extra_pairs=extra)
        doc.update({"kind": "convexity", "fn": args.fn})
    elif args.kind == "restart":
        loss_cfg = _load_loss(args.loss)
        opt_cfg = _load_opt(args.opt)
        seeds = [int(s) for s in args.seeds.split(",")]
        doc = restart_study(bundle, loss_cfg, opt_cfg, seeds)
        doc["kind"] = "restart"
    else:
        mae_moment = LossConfig(terms=("mae", "moment"))
        mae_dvh = LossConfig(terms=("mae", "dvh"))
        t_moment = benchmark_loss_iteration(bundle, mae_moment)
        t_dvh = benchmark_loss_iteration(bundle, mae_dvh)
        doc = {
            "kind": "cost",
            "mae_moment_s_per_iter": t_moment,
            "mae_dvh_s_per_iter": t_dvh,
            "ratio_dvh_over_moment": t_dvh / t_moment,
        }
    print(json.dumps({k: v for k, v in doc.items() if k != "restarts"},
                     indent=2, sort_keys=True))
    if args.out:
        _dump_json(args.out, doc)
        write_manifest(manifest_path_for(args.out), build_manifest(
            "probe", argv, {"kind": args.kind, "fn": args.fn, "pairs": args.pairs},
            seeds={"seed": seed}))
    return EXIT_OK


def load_split(manifest_path) -> dict[str, list[CaseBundle]]:
    """Load the train/val/test case bundles named by a dataset manifest."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    root = manifest_path.parent
    split: dict[str, list[CaseBundle]] = {"train": [], "val": [], "test": []}
    for entry in manifest["cases"]:
        split[entry["split"]].append(load_case(root / entry["dir"]))
    return split


def _cmd_train(args, argv) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    split = load_split(args.data)
    loss_cfg = _load_loss(args.loss)
    model_cfg = ModelConfig.load(args.model) if args.model else ModelConfig()
    opt_cfg = _load_opt(args.opt)
    cfg = TrainConfig(loss=loss_cfg, optimizer=opt_cfg, epochs=args.epochs,
                      seed=seed, prescription=args.rx)

    started = time.perf_counter()
    result = train(split["train"], split["val"], model_cfg, cfg, out_dir=args.out)
    elapsed = time.perf_counter() - started

    out_dir = Path(args.out)
    if split["test"]:
        from .tinymodel import load_checkpoint as _load

        best_params, _ = _load(out_dir / "best.ckpt")
        holdout = evaluate_holdout(best_params, model_cfg, split["test"],
                                   prescription=args.rx)
        metrics_dir = out_dir / "metrics"
        metrics_dir.mkdir(exist_ok=True)
        for report in holdout["reports"]:
            _dump_json(metrics_dir / f"{report.case_id}.json", report.to_json())
        _dump_json(out_dir / "holdout.json", {
            "mean_dose_score": holdout["mean_dose_score"],
            "mean_dvh_score": holdout["mean_dvh_score"],
            "cases": [r.case_id for r in holdout["reports"]],
        })
        print(f"holdout: dose_score {holdout['mean_dose_score']:.3f} Gy, "
              f"dvh_score {holdout['mean_dvh_score']:.3f} Gy")

    write_manifest(out_dir / "run_manifest.json", build_manifest(
        "train", argv,
        {"loss": loss_cfg.to_json(), "model": model_cfg.to_json(),
         "opt": opt_cfg.to_json(), "epochs": args.epochs},
        seeds={"seed": seed},
        timing={"total_s": elapsed},
    ))
    print(f"trained {args.epochs} epochs in {elapsed:.1f}s; "
          f"best val epoch {result.best_epoch}")
    return EXIT_OK


def _cmd_predict(args, argv) -> int:
    params, model_cfg = load_checkpoint(args.ckpt)
    bundle = load_case(args.case)
    pred = predict_dose(params, model_cfg, bundle)
    write_grid(args.out, pred)
    write_manifest(manifest_path_for(args.out), build_manifest(
        "predict", argv, {"ckpt": str(args.ckpt), "model": model_cfg.to_json()}))
    print(f"wrote prediction for {bundle.case_id} to {args.out}")
    return EXIT_OK


def _cmd_eval(args, argv) -> int:
    bundle = load_case(args.case)
    pred = read_grid(args.pred)
    ref = read_grid(args.ref)
    report = compute_report(pred, ref, bundle.structures, case_id=bundle.case_id,
                            prescription=args.rx)
    print(f"dose_score {report.dose_score:.4f} Gy, dvh_score {report.dvh_score:.4f} Gy")
    if args.out:
        _dump_json(args.out, report.to_json())
        write_manifest(manifest_path_for(args.out), build_manifest(
            "eval", argv, {"rx": args.rx}))
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["case_id", "structure", "criterion", "ref", "pred", "abs_error"])
            for row in report.criteria:
                writer.writerow([report.case_id, row["structure"], row["criterion"],
                                 repr(row["ref"]), repr(row["pred"]), repr(row["abs_error"])])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Aggregated report
# ---------------------------------------------------------------------------

def _find_reports(run_dir: Path) -> list[dict]:
    reports = []
    for path in sorted(run_dir.rglob("*.json")):
        try:
            with open(path) as f:
                doc = json.load(f)
        except (json.JSONDecodeError, OSError):
            continue
        if isinstance(doc, dict) and "dose_score" in doc and "criteria" in doc:
            reports.append(doc)
    return reports


def aggregate_reports(reports: list[dict], prescription: float) -> dict:
    """Per-criterion mean absolute error (percent of prescription) with the
    95% CI half-width 1.96*sigma/sqrt(n); CI omitted at n=1."""
    if not reports:
        raise DataError("no metrics reports found")
    keys = [(r["structure"], r["criterion"]) for r in reports[0]["criteria"]]
    for doc in reports[1:]:
        if [(r["structure"], r["criterion"]) for r in doc["criteria"]] != keys:
            raise DataError("inconsistent criteria sets across reports")

    rows = []
    for i, (structure, criterion) in enumerate(keys):
        errs = np.array([doc["criteria"][i]["abs_error"] for doc in reports])
        pct = errs / prescription * 100.0
        n = len(pct)
        row = {"structure": structure, "criterion": criterion,
               "mean_abs_err_pct": float(pct.mean()), "n": n}
        if n > 1:
            row["ci95_pct"] = float(1.96 * pct.std(ddof=1) / np.sqrt(n))
        else:
            row["ci95_pct"] = None
            row["note"] = "n=1, CI omitted"
        rows.append(row)

    return {
        "n_cases": len(reports),
        "criteria": rows,
        "mean_dose_score": float(np.mean([d["dose_score"] for d in reports])),
        "mean_dvh_score": float(np.mean([d["dvh_score"] for d in reports])),
        "mean_hi_error": float(np.mean([d["hi_error"] for d in reports])),
        "mean_pci_error": float(np.mean([d["pci_error"] for d in reports])),
    }


def _cmd_report(args, argv) -> int:
    runs = []
    for run_dir in args.run_dirs:
        reports = _find_reports(Path(run_dir))
        if not reports:
            raise DataError(f"{run_dir}: no metrics reports found")
        agg = aggregate_reports(reports, args.rx)
        curves = [{"case_id": d.get("case_id"), "dvh_curves": d["dvh_curves"]}
                  for d in reports if d.get("dvh_curves")]
        runs.append({"run_dir": str(run_dir), "aggregate": agg, "dvh_curves": curves})

    doc = {"prescription": args.rx, "runs": runs}
    if len(runs) == 2:
        # relative improvement of run b over run a: (a - b)/a per metric
        a, b = runs[0]["aggregate"], runs[1]["aggregate"]
        doc["relative_improvement_pct"] = {
            key: (100.0 * (a[key] - b[key]) / a[key]) if a[key] else None
            for key in ("mean_dose_score", "mean_dvh_score", "mean_hi_error",
                        "mean_pci_error")
        }

    for run in runs:
        agg = run["aggregate"]
        print(f"{run['run_dir']}: dvh_score {agg['mean_dvh_score']:.4f} Gy over "
              f"{agg['n_cases']} case(s)")

    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["run_dir", "structure", "criterion",
                             "mean_abs_err_pct", "ci95_pct", "n"])
            for run in runs:
                for row in run["aggregate"]["criteria"]:
                    writer.writerow([
                        run["run_dir"], row["structure"], row["criterion"],
                        repr(row["mean_abs_err_pct"]),
                        "" if row["ci95_pct"] is None else repr(row["ci95_pct"]),
                        row["n"],
                    ])
    if args.json_out:
        _dump_json(args.json_out, doc)
        write_manifest(manifest_path_for(args.json_out), build_manifest(
            "report", argv, {"run_dirs": [str(d) for d in args.run_dirs], "rx": args.rx}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "phantom": _cmd_phantom,
    "preprocess": _cmd_preprocess,
    "losses": _cmd_losses,
    "gradcheck": _cmd_gradcheck,
    "mimic": _cmd_mimic,
    "probe": _cmd_probe,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = _COMMANDS[args.command]

    def run() -> int:
        try:
            return handler(args, argv)
        except (DataError, FileNotFoundError, KeyError, json.JSONDecodeError) as e:
            print(f"dosekit: data error: {e}", file=sys.stderr)
            return EXIT_DATA
        except NumericalError as e:
            print(f"dosekit: numerical failure: {e}", file=sys.stderr)
            return EXIT_NUMERIC

    if args.threads and args.threads > 0:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return run()
    return run()


def main() -> None:
    raise SystemExit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
