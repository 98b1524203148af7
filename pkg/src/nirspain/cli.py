"""Command-line entry point.

Subcommands:
  synth      generate a labeled synthetic dataset (CSV recordings + manifest)
  train      run the cross-validation experiment and emit result tables
  eval       apply a saved checkpoint to a manifest of recordings
  report     re-emit tables and curves from a previous run directory
  gradcheck  run the finite-difference gradient suite

All commands are deterministic for a fixed --seed. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import dataio, gradcheck, report, synthgen, trainer
from .layers import MODEL_KINDS, ModelSpec, load_checkpoint


def _load_cfg(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return config_mod.parse_config(getattr(args, "config", None), overrides)


def _prepare_windows(cfg, data_dir):
    recordings = dataio.load_dataset(Path(data_dir) / "manifest.csv")
    windows, labels, origins = dataio.segment_recordings(
        recordings, cfg.window, cfg.overlap
    )
    if cfg.standardize:
        windows = dataio.standardize_channels(windows)
    return dataio.split_and_fold(
        windows, labels, origins, cfg.train_fraction, cfg.n_folds, cfg.seed
    )


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    recordings = synthgen.generate_dataset(cfg.synth_config())
    manifest = dataio.save_dataset(recordings, args.out)
    print(f"wrote {len(recordings)} recordings and {manifest}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    kinds = list(MODEL_KINDS) if args.models == "all" else [args.models]
    specs = [ModelSpec(kind) for kind in kinds]
    ws = _prepare_windows(cfg, args.data)
    reports = trainer.run_cv_experiment(
        specs, ws, cfg.train_config(), out_dir=args.out, jobs=args.jobs
    )
    written = report.emit_reports(reports, args.out)
    for r in reports:
        print(
            f"{r.kind}: accuracy {r.accuracy:.1f}% sensitivity {r.sensitivity:.1f}% "
            f"specificity {r.specificity:.1f}% (best fold {r.best_fold})"
        )
    print(f"wrote {', '.join(str(p) for p in written[:2])} and confusion tables")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    state = load_checkpoint(args.checkpoint)
    recordings = dataio.load_dataset(Path(args.data) / "manifest.csv")
    windows, labels, _ = dataio.segment_recordings(recordings, cfg.window, cfg.overlap)
    if cfg.standardize:
        windows = dataio.standardize_channels(windows)
    loss, acc, preds = trainer.evaluate(state, windows, labels)
    cm = report.confusion_matrix(preds, labels, state.spec.n_classes)
    accuracy, sens, spec = report.classification_metrics(cm)
    print(f"windows {len(labels)}  loss {loss:.4f}")
    print(
        f"accuracy {accuracy:.1f}%  sensitivity {sens:.1f}%  specificity {spec:.1f}%"
    )
    if args.out:
        run = report.RunReport(
            kind=state.spec.kind, accuracy=accuracy, sensitivity=sens,
            specificity=spec, confusion=cm, history=[],
        )
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_report_json(out / "eval_report.json", [run])
        print(f"wrote {out / 'eval_report.json'}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    reports = report.read_report_json(run_dir / "report.json")
    by_kind = trainer.read_history_csv(run_dir / "history.csv")
    for r in reports:
        folds = by_kind.get(r.kind)
        if folds:
            r.history = trainer.average_histories(list(folds.values()))
    written = report.emit_reports(reports, args.out)
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(n_seeds=args.seeds)
    worst = max(results.values())
    for name, err in results.items():
        flag = "ok" if err < gradcheck.TOLERANCE else "FAIL"
        print(f"{name:<20} max relative error {err:.3e}  {flag}")
    if worst >= gradcheck.TOLERANCE:
        print(f"worst error {worst:.3e} exceeds {gradcheck.TOLERANCE:.0e}")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nirspain",
        description="Train and evaluate pain-class sequence models on "
        "24-channel 10 Hz time series.",
        epilog=config_mod.describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=None):
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=seed_default,
                       help="RNG seed (overrides the config file)")

    p = sub.add_parser("synth", help="generate a synthetic dataset",
                       epilog=config_mod.describe_keys(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="run the cross-validation experiment",
                       epilog=config_mod.describe_keys(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--data", type=Path, required=True,
                   help="dataset directory containing manifest.csv")
    p.add_argument("--out", type=Path, required=True, help="run output directory")
    p.add_argument("--models", choices=list(MODEL_KINDS) + ["all"], default="all")
    p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest",
                       epilog=config_mod.describe_keys(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True,
                   help="dataset directory containing manifest.csv")
    p.add_argument("--out", type=Path, default=None, help="optional report directory")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="re-emit tables/curves from a run directory")
    p.add_argument("--run", type=Path, required=True,
                   help="directory with history.csv and report.json")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="run the finite-difference suite")
    p.add_argument("--seeds", type=int, default=5, help="seeds per check")
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (config_mod.ConfigError, dataio.DataFormatError, trainer.TrainingDivergedError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
