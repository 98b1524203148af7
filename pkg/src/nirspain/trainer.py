"""Adam optimization, the training loop, and the cross-validation driver.

Training runs minibatch Adam with dropout active, evaluates on the
validation split after every epoch with dropout inactive, stops early when
validation loss has not decreased for `patience` consecutive epochs, and
returns the checkpoint with the highest validation accuracy (earliest epoch
on ties). The experiment driver splits first (70/30 at trial level), folds
the train side ten ways, trains one model per fold, and evaluates only the
best fold's model on the held-out test windows.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report as report_mod
from .dataio import WindowSet
from .layers import ModelSpec, ModelState, build_model, save_checkpoint
from .numerics import one_hot, softmax_crossentropy

# stable per-kind codes so (seed, kind, fold) RNG streams do not depend on
# which subset of models a run trains
KIND_CODES = {"mlp": 0, "lstm_fwd": 1, "lstm_bwd": 2, "bilstm": 3}
KIND_ORDER = ("mlp", "lstm_fwd", "lstm_bwd", "bilstm")

HISTORY_HEADER = ["spec", "fold", "epoch", "train_loss", "val_loss", "train_acc", "val_acc"]


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the epoch/batch where it happened."""


@dataclass
class TrainConfig:
    max_epochs: int = 300
    patience: int = 50
    batch_size: int = 64
    n_folds: int = 10
    train_fraction: float = 0.7
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    # relu cell activations make BPTT gradients spike by orders of magnitude
    # on occasional batches; unclipped spikes poison Adam's second moment and
    # freeze learning, so minibatch gradients are rescaled to this global
    # L2 norm when they exceed it. 0 disables.
    grad_clip_norm: float = 5.0
    seed: int = 7

    def __post_init__(self):
        if not self.patience < self.max_epochs:
            raise ValueError("patience must be smaller than max_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float


class AdamState:
    """First/second moment accumulators plus the step counter."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(params, grads, state: AdamState):
    """One Adam update, in place so parameter views stay valid.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;  with bias correction
    m_hat = m/(1-b1^t), v_hat = v/(1-b2^t);  p <- p - lr*m_hat/(sqrt(v_hat)+eps)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params/grads/state lengths differ")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def clip_gradients(grads, max_norm):
    """Scale grads in place so their global L2 norm is at most max_norm."""
    if not max_norm:
        return grads
    total = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return grads


def evaluate(state: ModelState, windows, labels, batch_size=512):
    """Mean loss, accuracy, and predictions with dropout inactive."""
    n = len(windows)
    onehot = one_hot(labels, state.spec.n_classes)
    total_loss = 0.0
    preds = np.empty(n, dtype=np.int64)
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        logits = state.forward(windows[lo:hi], training=False)
        loss, _ = softmax_crossentropy(logits, onehot[lo:hi])
        total_loss += loss * (hi - lo)
        preds[lo:hi] = np.argmax(logits, axis=1)
    acc = float(np.mean(preds == labels))
    return total_loss / n, acc, preds


def train_one_model(spec, train_windows, train_labels, val_windows, val_labels,
                    cfg: TrainConfig, seed=None):
    """Train one model; returns (best state, history, stopped_epoch).

    The returned model is the epoch snapshot with the highest validation
    accuracy (earliest epoch on ties); stopped_epoch == len(history).
    """
    if len(train_windows) == 0 or len(val_windows) == 0:
        raise ValueError("train and validation sets must both be nonempty")
    train_windows = np.asarray(train_windows, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    state = build_model(spec, train_windows.shape[1:], int(rng.integers(2**32)))
    params = state.parameters()
    adam = AdamState(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    onehot = one_hot(train_labels, spec.n_classes)
    n = len(train_windows)

    history = []
    best_val_loss = np.inf
    epochs_since_improvement = 0
    best_val_acc = -1.0
    best_params = state.copy_parameters()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            xb = train_windows[idx]
            logits = state.forward(xb, training=True, rng=rng)
            loss, dlogits = softmax_crossentropy(logits, onehot[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"{spec.kind}: non-finite loss at epoch {epoch}, "
                    f"batch {lo // cfg.batch_size}"
                )
            state.backward(dlogits)
            grads = clip_gradients(state.gradients(), cfg.grad_clip_norm)
            adam_step(params, grads, adam)
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == train_labels[idx]))
        val_loss, val_acc, _ = evaluate(state, val_windows, val_labels)
        history.append(
            EpochRecord(epoch, loss_sum / n, val_loss, correct / n, val_acc)
        )
        if val_acc > best_val_acc:
            best_val_acc = val_acc
            best_params = state.copy_parameters()
        if val_loss < best_val_loss:
            best_val_loss = val_loss
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= cfg.patience:
                break
    state.load_parameters(best_params)
    return state, history, len(history)


def average_histories(histories):
    """Per-epoch mean across folds; shorter folds carry their last value."""
    longest = max(len(h) for h in histories)
    out = []
    for e in range(longest):
        rows = [h[min(e, len(h) - 1)] for h in histories]
        out.append(
            EpochRecord(
                epoch=e + 1,
                train_loss=float(np.mean([r.train_loss for r in rows])),
                val_loss=float(np.mean([r.val_loss for r in rows])),
                train_acc=float(np.mean([r.train_acc for r in rows])),
                val_acc=float(np.mean([r.val_acc for r in rows])),
            )
        )
    return out


def _fold_seed(seed, kind, fold):
    return [seed, KIND_CODES[kind], fold]


def _fold_job(args):
    spec, xtr, ytr, xval, yval, cfg, seed = args
    state, history, stopped = train_one_model(spec, xtr, ytr, xval, yval, cfg, seed)
    best_val_acc = max(r.val_acc for r in history)
    return history, stopped, best_val_acc, state


def run_cv_experiment(specs, ws: WindowSet, cfg: TrainConfig, out_dir=None, jobs=1):
    """k-fold CV per spec on the train windows, then one test-set evaluation.

    For each spec every fold k trains on the other folds with fold k as
    validation; per-epoch histories are averaged across folds and the fold
    model with the highest validation accuracy is evaluated once on the
    held-out test windows. Deterministic for fixed (dataset, specs, seed),
    independent of fold execution order.
    """
    train_mask = ws.train_mask
    test_mask = ws.test_mask
    x_test, y_test = ws.windows[test_mask], ws.labels[test_mask]
    reports = []
    history_rows = []
    checkpoint_paths = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        jobs_args = []
        for k in range(ws.n_folds):
            tr = ws.fold_train_mask(k)
            va = ws.fold_val_mask(k)
            if not va.any():
                raise ValueError(f"fold {k} is empty")
            jobs_args.append(
                (spec, ws.windows[tr], ws.labels[tr], ws.windows[va], ws.labels[va],
                 cfg, _fold_seed(cfg.seed, spec.kind, k))
            )
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                fold_results = list(pool.map(_fold_job, jobs_args))
        else:
            fold_results = [_fold_job(a) for a in jobs_args]

        histories = [r[0] for r in fold_results]
        for k, (hist, _, _, _) in enumerate(fold_results):
            for rec in hist:
                history_rows.append((spec.kind, k, rec))
        best_fold = int(np.argmax([r[2] for r in fold_results]))
        best_state = fold_results[best_fold][3]
        if out_dir is not None:
            for k, (_, _, _, st) in enumerate(fold_results):
                path = out_dir / f"{spec.kind}_fold{k}.ckpt"
                save_checkpoint(path, st)
                checkpoint_paths[(spec.kind, k)] = path
        _, test_acc, preds = evaluate(best_state, x_test, y_test)
        cm = report_mod.confusion_matrix(preds, y_test, spec.n_classes)
        acc, sens, spc = report_mod.classification_metrics(cm)
        reports.append(
            report_mod.RunReport(
                kind=spec.kind,
                accuracy=acc,
                sensitivity=sens,
                specificity=spc,
                confusion=cm,
                history=average_histories(histories),
                best_fold=best_fold,
                n_test=len(y_test),
            )
        )
    if out_dir is not None:
        write_history_csv(out_dir / "history.csv", history_rows)
        report_mod.write_report_json(out_dir / "report.json", reports)
    return reports


def write_history_csv(path, history_rows):
    """history.csv: spec,fold,epoch,train_loss,val_loss,train_acc,val_acc."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for kind, fold, rec in history_rows:
            writer.writerow(
                [kind, fold, rec.epoch, f"{rec.train_loss:.6f}", f"{rec.val_loss:.6f}",
                 f"{rec.train_acc:.6f}", f"{rec.val_acc:.6f}"]
            )


def read_history_csv(path):
    """Inverse of write_history_csv; returns {kind: {fold: [EpochRecord]}}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HISTORY_HEADER:
            raise ValueError(f"{path}: unexpected history header {header}")
        for kind, fold, epoch, tl, vl, ta, va in reader:
            rec = EpochRecord(int(epoch), float(tl), float(vl), float(ta), float(va))
            out.setdefault(kind, {}).setdefault(int(fold), []).append(rec)
    return out
