"""Command-line experiment runner.

Subcommands:
  generate         write a synthetic dataset (PLY + JSON sidecars + manifest)
  run              full pipeline over a dataset (or freshly generated models)
  ablate-sampling  FPS/APS x max-centroids table (Acc./Recall/C. Dist./IoU/Dice)
  ablate-arch      direct_fit/coarse/coarse_fine table (Acc./Recall/MSE(1e-4))
  eval             metrics on existing prediction artifacts
  report           re-render a metrics CSV as an aligned text table

Exit codes: 0 success, 1 a per-model failure occurred, 2 invalid config/usage.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import io as aio
from .detection import detection_metrics
from .pipeline import (
    ExperimentConfig,
    load_config,
    model_seeds,
    run_dataset,
    run_models,
)
from .segmentation import iou_dice
from .synthetic import generate_model, with_seed

EXIT_OK = 0
EXIT_MODEL_FAILURE = 1
EXIT_BAD_CONFIG = 2


def _config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if getattr(args, "sampling", None) is not None:
        config = dataclasses.replace(config, sampling_method=args.sampling)
    if getattr(args, "centroids", None) is not None:
        config = dataclasses.replace(
            config,
            detection=dataclasses.replace(
                config.detection, max_centroids=args.centroids
            ),
        )
    if getattr(args, "n_models", None) is not None:
        config = dataclasses.replace(config, n_models=args.n_models)
    return config


def _dataset_models(config: ExperimentConfig, args):
    """(models, visible_lists) from --dataset if given, else generated."""
    if getattr(args, "dataset", None):
        manifest = Path(args.dataset) / "manifest.json"
        entries = aio.read_manifest(manifest)
        models = []
        visible = []
        for entry in entries:
            models.append(
                aio.load_model(
                    manifest.parent / entry["ply"], manifest.parent / entry["json"]
                )
            )
            visible.append(entry.get("visible_instances"))
        return models, visible
    return None, None


def render_table(headers, rows) -> str:
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(headers))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_csv(path, headers, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)


def cmd_generate(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    entries = []
    for i in range(config.n_models):
        scan_seed, _ = model_seeds(config, i)
        model = generate_model(with_seed(config.scan, scan_seed))
        ply, sidecar = f"model_{i:04d}.ply", f"model_{i:04d}.json"
        aio.save_model(model, out / ply, out / sidecar)
        entry = {"index": i, "ply": ply, "json": sidecar, "split": "full"}
        if args.weak_ratio > 0:
            n_visible = max(1, int(round(args.weak_ratio * model.n_teeth)))
            ids = rng.choice(model.n_teeth, size=n_visible, replace=False) + 1
            entry["split"] = "weak"
            entry["visible_instances"] = sorted(int(k) for k in ids)
        entries.append(entry)
    aio.write_manifest(out / "manifest.json", entries)
    print(f"wrote {config.n_models} models to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _config_from_args(args)
    models, visible = _dataset_models(config, args)
    if models is None:
        report = run_dataset(config, jobs=args.jobs)
    else:
        report = run_models(config, models, jobs=args.jobs, visible_lists=visible)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "report.json")
    for metrics in report.per_model:
        print(
            f"model {metrics['model']:4d}: acc {metrics['accuracy']:.2f} "
            f"recall {metrics['recall']:.2f} chamfer {metrics['chamfer']:.3e}"
        )
    print("aggregate:", json.dumps(report.aggregate, sort_keys=True))
    if report.failures:
        for f in report.failures:
            print(f"model {f['model']} FAILED:\n{f['error']}", file=sys.stderr)
        return EXIT_MODEL_FAILURE
    return EXIT_OK


def _fmt(x, nd=2):
    return f"{x:.{nd}f}"


def cmd_ablate_sampling(args) -> int:
    config = _config_from_args(args)
    models, visible = _dataset_models(config, args)
    headers = ["Method", "Acc.", "Recall", "C. Dist.", "IoU", "Dice"]
    rows = []
    failed = False
    for method in ("fps", "aps"):
        for k in args.centroid_grid:
            variant = dataclasses.replace(
                config,
                sampling_method=method,
                detection=dataclasses.replace(config.detection, max_centroids=k),
            )
            if models is None:
                report = run_dataset(variant, jobs=args.jobs)
            else:
                report = run_models(variant, models, jobs=args.jobs, visible_lists=visible)
            failed = failed or bool(report.failures)
            agg = report.aggregate
            rows.append(
                [
                    f"{method.upper()}-{k}",
                    _fmt(agg["accuracy"]),
                    _fmt(agg["recall"]),
                    _fmt(agg["chamfer"], 4),
                    _fmt(agg.get("mean_iou", float("nan"))),
                    _fmt(agg.get("mean_dice", float("nan"))),
                ]
            )
    table = render_table(headers, rows)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "ablate_sampling.csv", headers, rows)
        (out / "ablate_sampling.txt").write_text(table + "\n")
    return EXIT_MODEL_FAILURE if failed else EXIT_OK


def cmd_ablate_arch(args) -> int:
    config = _config_from_args(args)
    models, visible = _dataset_models(config, args)
    headers = ["Mode", "Acc.", "Recall", "MSE(1e-4)"]
    pretty = {"direct_fit": "Direct", "coarse": "Coarse", "coarse_fine": "Coarse + Fine"}
    rows = []
    failed = False
    for mode in ("direct_fit", "coarse", "coarse_fine"):
        variant = dataclasses.replace(config, arch_mode=mode)
        if models is None:
            report = run_dataset(variant, jobs=args.jobs)
        else:
            report = run_models(variant, models, jobs=args.jobs, visible_lists=visible)
        failed = failed or bool(report.failures)
        agg = report.aggregate
        rows.append(
            [
                pretty[mode],
                _fmt(agg["accuracy"]),
                _fmt(agg["recall"]),
                _fmt(agg["arch_mse"] * 1e4),
            ]
        )
    table = render_table(headers, rows)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "ablate_arch.csv", headers, rows)
        (out / "ablate_arch.txt").write_text(table + "\n")
    return EXIT_MODEL_FAILURE if failed else EXIT_OK


def cmd_eval(args) -> int:
    """Metrics on existing predictions against a ground-truth model pair.

    --pred is either a labeled PLY (segmentation -> IoU/Dice) or a detection
    JSON with predicted centroids (-> accuracy/recall/chamfer).
    """
    model = aio.load_model(args.gt_ply, args.gt_json)
    pred_path = Path(args.pred)
    if pred_path.suffix == ".ply":
        _, labels = aio.read_ply(pred_path)
        if labels is None:
            print(f"{pred_path}: no instance labels to evaluate", file=sys.stderr)
            return EXIT_BAD_CONFIG
        result = iou_dice(labels, model.labels)
    else:
        detection = aio.read_detection_json(pred_path)
        result = detection_metrics(
            detection["centroids"], model.centroids, args.match_threshold
        )
    print(json.dumps(result, indent=1, sort_keys=True))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(result, fh, indent=1, sort_keys=True)
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        print(f"{args.csv}: empty CSV", file=sys.stderr)
        return EXIT_BAD_CONFIG
    table = render_table(rows[0], rows[1:])
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archseg", description="Arch-prior tooth detection and segmentation."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if dataset:
            p.add_argument("--dataset", help="directory with manifest.json")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-models", type=int, help="override model count")
    p.add_argument(
        "--weak-ratio",
        type=float,
        default=0.0,
        help="fraction of instances visible to loss evaluation (0 = full)",
    )
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the full pipeline")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--sampling", choices=("aps", "fps", "random"))
    p.add_argument("--centroids", type=int, help="max retained centroids")
    p.add_argument("--n-models", type=int, help="override model count")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate-sampling", help="FPS/APS x centroid-count table")
    common(p)
    p.add_argument("--out")
    p.add_argument(
        "--centroid-grid",
        type=int,
        nargs="+",
        default=[20, 30],
        help="max-centroid values per sampling method",
    )
    p.set_defaults(func=cmd_ablate_sampling)

    p = sub.add_parser("ablate-arch", help="arch-mode comparison table")
    common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate_arch)

    p = sub.add_parser("eval", help="metrics on existing predictions")
    p.add_argument("--pred", required=True, help="labeled PLY or detection JSON")
    p.add_argument("--gt-ply", required=True)
    p.add_argument("--gt-json", required=True)
    p.add_argument("--match-threshold", type=float, default=0.3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="re-render a metrics CSV as a text table")
    p.add_argument("--csv", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
