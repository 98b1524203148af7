"""Confusion matrices, multi-class metrics, and CSV emission.

Sensitivity and specificity are macro-averaged one-vs-rest over the four
classes: per class c, sens_c = TP/(TP+FN) and spec_c = TN/(TN+FP); classes
with no positive (resp. no negative) examples are excluded from the mean.
All three metrics are reported as percentages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import CLASS_NAMES

RESULTS_NOTE = (
    "# sensitivity and specificity are macro-averaged one-vs-rest percentages\n"
)
RESULTS_HEADER = "model,accuracy,sensitivity,specificity\n"
CURVES_HEADER = "model,epoch,train_loss,val_loss,train_acc,val_acc\n"

_KIND_ORDER = ("mlp", "lstm_fwd", "lstm_bwd", "bilstm")


@dataclass
class RunReport:
    """Final evaluation of one model kind plus its fold-averaged history."""

    kind: str
    accuracy: float  # percent
    sensitivity: float  # percent, macro-averaged
    specificity: float  # percent, macro-averaged
    confusion: np.ndarray  # [C, C] counts, rows = true class
    history: list  # fold-averaged EpochRecords
    best_fold: int = 0
    n_test: int = 0


def confusion_matrix(predictions, truths, n_classes: int = 4) -> np.ndarray:
    """counts[true][predicted] over paired class lists."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape or predictions.ndim != 1:
        raise ValueError(
            f"predictions ({predictions.shape}) and truths ({truths.shape}) "
            "must be equal-length 1-D lists"
        )
    for name, arr in (("prediction", predictions), ("truth", truths)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} class out of range 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truths, predictions), 1)
    return cm


def classification_metrics(cm) -> tuple[float, float, float]:
    """(accuracy, sensitivity, specificity) in percent from a confusion matrix."""
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = np.trace(cm) / total
    sens, spec = [], []
    for c in range(cm.shape[0]):
        tp = cm[c, c]
        fn = cm[c].sum() - tp
        fp = cm[:, c].sum() - tp
        tn = total - tp - fn - fp
        if tp + fn > 0:
            sens.append(tp / (tp + fn))
        if tn + fp > 0:
            spec.append(tn / (tn + fp))
    sensitivity = float(np.mean(sens)) if sens else 0.0
    specificity = float(np.mean(spec)) if spec else 0.0
    return 100.0 * accuracy, 100.0 * sensitivity, 100.0 * specificity


def _ordered(reports):
    rank = {k: i for i, k in enumerate(_KIND_ORDER)}
    return sorted(reports, key=lambda r: rank.get(r.kind, len(rank)))


def emit_reports(reports, out_dir) -> list[Path]:
    """Write results_table.csv, curves.csv, and confusion_<kind>.csv.

    Percentages are rounded to one decimal; identical reports produce
    identical bytes. Rows follow the fixed model order mlp, lstm_fwd,
    lstm_bwd, bilstm.
    """
    if not reports:
        raise ValueError("no reports to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = _ordered(reports)
    written = []

    table = out_dir / "results_table.csv"
    with open(table, "w", newline="", encoding="utf-8") as fh:
        fh.write(RESULTS_NOTE)
        fh.write(RESULTS_HEADER)
        for r in reports:
            fh.write(
                f"{r.kind},{r.accuracy:.1f},{r.sensitivity:.1f},{r.specificity:.1f}\n"
            )
    written.append(table)

    curves = out_dir / "curves.csv"
    with open(curves, "w", newline="", encoding="utf-8") as fh:
        fh.write(CURVES_HEADER)
        for r in reports:
            for rec in r.history:
                fh.write(
                    f"{r.kind},{rec.epoch},{rec.train_loss:.6f},{rec.val_loss:.6f},"
                    f"{rec.train_acc:.6f},{rec.val_acc:.6f}\n"
                )
    written.append(curves)

    for r in reports:
        path = out_dir / f"confusion_{r.kind}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("true_class," + ",".join(CLASS_NAMES[: r.confusion.shape[1]]) + "\n")
            for c, row in enumerate(r.confusion):
                fh.write(CLASS_NAMES[c] + "," + ",".join(str(int(v)) for v in row) + "\n")
        written.append(path)
    return written


def write_report_json(path, reports):
    """Machine-readable companion to the CSVs, used to re-emit tables later."""
    payload = []
    for r in _ordered(reports):
        payload.append(
            {
                "kind": r.kind,
                "accuracy": r.accuracy,
                "sensitivity": r.sensitivity,
                "specificity": r.specificity,
                "confusion": [[int(v) for v in row] for row in r.confusion],
                "best_fold": r.best_fold,
                "n_test": r.n_test,
                "history": [
                    [rec.epoch, rec.train_loss, rec.val_loss, rec.train_acc, rec.val_acc]
                    for rec in r.history
                ],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_report_json(path) -> list[RunReport]:
    from .trainer import EpochRecord  # local import keeps report importable alone

    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out = []
    for item in payload:
        out.append(
            RunReport(
                kind=item["kind"],
                accuracy=item["accuracy"],
                sensitivity=item["sensitivity"],
                specificity=item["specificity"],
                confusion=np.asarray(item["confusion"], dtype=np.int64),
                history=[EpochRecord(*row) for row in item["history"]],
                best_fold=item["best_fold"],
                n_test=item["n_test"],
            )
        )
    return out
