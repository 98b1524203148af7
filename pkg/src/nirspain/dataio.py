"""Recordings, sliding-window segmentation, and trial-level train/test folding.

File formats:
  recording CSV  header ``t,ch01,...,ch24``; t in seconds at 0.1 s steps
  manifest CSV   header ``file,subject,trial,class``;
                 class in {low_cold, low_heat, high_cold, high_heat}
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLE_RATE_HZ = 10.0
N_CHANNELS = 24
WINDOW_SAMPLES = 300

RECORDING_HEADER = ["t"] + [f"ch{c:02d}" for c in range(1, N_CHANNELS + 1)]
MANIFEST_HEADER = ["file", "subject", "trial", "class"]


class PainClass(enum.IntEnum):
    LOW_COLD = 0
    LOW_HEAT = 1
    HIGH_COLD = 2
    HIGH_HEAT = 3

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "PainClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown pain class {name!r}") from None


CLASS_NAMES = tuple(c.label_name for c in PainClass)


class DataFormatError(ValueError):
    """A data file violates the expected layout; message carries the location."""


@dataclass
class Recording:
    """One trial: 24-channel HbO series at 10 Hz plus its pain-class label."""

    subject_id: str
    trial_id: str
    channels: np.ndarray  # [T, 24] float64
    label: PainClass
    sample_rate: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.float64)
        if self.channels.ndim != 2 or self.channels.shape[1] != N_CHANNELS:
            raise DataFormatError(
                f"recording {self.subject_id}/{self.trial_id}: expected "
                f"{N_CHANNELS} channel columns, got shape {self.channels.shape}"
            )
        if self.sample_rate != SAMPLE_RATE_HZ:
            raise DataFormatError(
                f"recording {self.subject_id}/{self.trial_id}: sample rate must "
                f"be {SAMPLE_RATE_HZ} Hz, got {self.sample_rate}"
            )
        self.label = PainClass(self.label)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[0]


@dataclass
class WindowSet:
    """Segmented windows with per-window origin, split tag, and CV fold id.

    fold_id is -1 for test windows. All windows of one trial share a split
    tag so overlapping windows can never straddle the train/test boundary.
    """

    windows: np.ndarray  # [n, window, 24]
    labels: np.ndarray  # [n] int
    origins: list  # (subject_id, trial_id, start_index) per window
    split_tags: np.ndarray  # [n] '<U5', 'train' or 'test'
    fold_ids: np.ndarray  # [n] int
    n_folds: int = 10

    @property
    def train_mask(self) -> np.ndarray:
        return self.split_tags == "train"

    @property
    def test_mask(self) -> np.ndarray:
        return self.split_tags == "test"

    def fold_val_mask(self, k: int) -> np.ndarray:
        return self.fold_ids == k

    def fold_train_mask(self, k: int) -> np.ndarray:
        return self.train_mask & (self.fold_ids != k)


def _parse_float(text, path, row, col):
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(
            f"{path}: non-numeric cell {text!r} at row {row}, column {col}"
        ) from None


def load_recording_csv(path, subject_id, trial_id, label) -> Recording:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"missing recording file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORDING_HEADER:
            got = 0 if header is None else len(header) - 1
            raise DataFormatError(
                f"{path}: expected header t,ch01..ch{N_CHANNELS} "
                f"({N_CHANNELS} data columns), got {got} data columns"
            )
        times = []
        rows = []
        for i, row in enumerate(reader, start=2):
            if len(row) != N_CHANNELS + 1:
                raise DataFormatError(
                    f"{path}: expected {N_CHANNELS + 1} columns at row {i}, "
                    f"got {len(row)}"
                )
            times.append(_parse_float(row[0], path, i, 1))
            rows.append([_parse_float(v, path, i, j + 2) for j, v in enumerate(row[1:])])
    times = np.asarray(times)
    if times.size > 1 and not np.all(np.diff(times) > 0):
        bad = int(np.argmin(np.diff(times) > 0)) + 2
        raise DataFormatError(f"{path}: time column not strictly increasing at row {bad}")
    return Recording(subject_id, trial_id, np.asarray(rows), label)


def load_dataset(manifest_path) -> list[Recording]:
    """Load every recording referenced by a manifest CSV."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataFormatError(f"missing manifest file: {manifest_path}")
    base = manifest_path.parent
    recordings = []
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DataFormatError(
                f"{manifest_path}: expected header {','.join(MANIFEST_HEADER)}"
            )
        for i, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DataFormatError(
                    f"{manifest_path}: expected 4 columns at row {i}, got {len(row)}"
                )
            fname, subject, trial, cls = row
            label = PainClass.from_name(cls)
            recordings.append(load_recording_csv(base / fname, subject, trial, label))
    return recordings


def save_dataset(recordings, out_dir) -> Path:
    """Write recordings and a manifest CSV to out_dir; returns the manifest path.

    Output is byte-for-byte deterministic for identical inputs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for rec in recordings:
        fname = f"rec_{rec.subject_id}_{rec.trial_id}.csv"
        with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(RECORDING_HEADER) + "\n")
            for i, row in enumerate(rec.channels):
                vals = ",".join(f"{v:.6f}" for v in row)
                fh.write(f"{i / rec.sample_rate:.1f},{vals}\n")
        manifest_rows.append((fname, rec.subject_id, rec.trial_id, rec.label.label_name))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(MANIFEST_HEADER) + "\n")
        for row in manifest_rows:
            fh.write(",".join(row) + "\n")
    return manifest


def window_segments(rec: Recording, window: int = WINDOW_SAMPLES, overlap: float = 0.5):
    """Sliding windows over one recording.

    stride = round(window * (1 - overlap)); starts at 0, stride, 2*stride, ...
    Trailing samples that do not fill a window are dropped. Each window
    inherits the recording's label.
    """
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    T = rec.n_samples
    if T < window:
        raise ValueError(
            f"recording {rec.subject_id}/{rec.trial_id} has {T} samples, "
            f"shorter than one {window}-sample window"
        )
    stride = int(round(window * (1.0 - overlap)))
    count = (T - window) // stride + 1
    out = []
    for k in range(count):
        start = k * stride
        out.append((rec.channels[start : start + window].copy(), rec.label, start))
    return out


def segment_recordings(recordings, window: int = WINDOW_SAMPLES, overlap: float = 0.5):
    """Segment many recordings into stacked arrays (windows, labels, origins)."""
    windows, labels, origins = [], [], []
    for rec in recordings:
        for w, lab, start in window_segments(rec, window, overlap):
            windows.append(w)
            labels.append(int(lab))
            origins.append((rec.subject_id, rec.trial_id, start))
    return np.stack(windows), np.asarray(labels, dtype=np.int64), origins


def split_and_fold(
    windows,
    labels,
    origins,
    train_fraction: float = 0.7,
    n_folds: int = 10,
    seed: int = 0,
) -> WindowSet:
    """Assign whole trials to train/test, then deal train trials into folds.

    Trials (not windows) are shuffled with the seeded RNG; the train prefix
    is cut where the cumulative window share is closest to train_fraction.
    Overlapping windows share raw samples, so any window-level split would
    leak test data into training. Train trials go round-robin into n_folds.
    """
    windows = np.asarray(windows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    trial_keys = []
    trial_of_window = []
    index_of = {}
    for sub, trial, _ in origins:
        key = (sub, trial)
        if key not in index_of:
            index_of[key] = len(trial_keys)
            trial_keys.append(key)
        trial_of_window.append(index_of[key])
    trial_of_window = np.asarray(trial_of_window)
    n_trials = len(trial_keys)
    counts = np.bincount(trial_of_window, minlength=n_trials)

    rng = np.random.default_rng(seed)
    order = rng.permutation(n_trials)
    cum = np.cumsum(counts[order]) / counts.sum()
    n_train_trials = int(np.argmin(np.abs(cum - train_fraction))) + 1
    n_train_trials = min(max(n_train_trials, 1), n_trials - 1)
    if n_train_trials < n_folds:
        raise ValueError(
            f"need at least {n_folds} trials in the train portion, "
            f"got {n_train_trials} of {n_trials}"
        )
    train_trials = order[:n_train_trials]
    fold_of_trial = np.full(n_trials, -1, dtype=np.int64)
    for pos, t in enumerate(train_trials):
        fold_of_trial[t] = pos % n_folds

    split_tags = np.where(fold_of_trial[trial_of_window] >= 0, "train", "test")
    fold_ids = fold_of_trial[trial_of_window]
    return WindowSet(windows, labels, list(origins), split_tags, fold_ids, n_folds)


def reverse_time(window) -> np.ndarray:
    """Reverse row (time) order; channel order unchanged. Involution."""
    return np.asarray(window, dtype=np.float64)[::-1].copy()


def to_mlp_matrix(window) -> np.ndarray:
    """Row-major flattening: time-major then channel."""
    return np.asarray(window, dtype=np.float64).reshape(-1).copy()


def standardize_channels(windows) -> np.ndarray:
    """Per-channel zero-mean unit-variance scaling across all windows.

    Off by default everywhere: the source signals are used raw.
    """
    windows = np.asarray(windows, dtype=np.float64)
    flat = windows.reshape(-1, windows.shape[-1])
    mean = flat.mean(axis=0)
    sd = flat.std(axis=0)
    sd[sd == 0] = 1.0
    return (windows - mean) / sd
