"""scikit-learn style wrappers so the models compose with the wider ecosystem.

`SequenceClassifier` exposes fit/predict/predict_proba over [n, T, channels]
window arrays; `WindowSegmenter` turns recordings into such arrays. Both
follow the BaseEstimator conventions (constructor params stored verbatim,
fitted attributes with trailing underscores, get_params/set_params/clone).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .dataio import Recording, segment_recordings
from .layers import MODEL_KINDS, ModelSpec
from .numerics import softmax
from .trainer import TrainConfig, evaluate, train_one_model


def check_windows(X, expect_shape=None) -> np.ndarray:
    """Validate a [n, T, channels] window array: 3-D, finite, float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-D (n, time, channels) array, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty window array")
    if not np.isfinite(X).all():
        raise ValueError("windows contain NaN or Inf")
    if expect_shape is not None and X.shape[1:] != tuple(expect_shape):
        raise ValueError(
            f"windows of shape {X.shape[1:]} do not match fitted shape {expect_shape}"
        )
    return X


def check_labels(y, n) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ValueError(f"labels must be 1-D with {n} entries, got shape {y.shape}")
    return y


class WindowSegmenter(TransformerMixin, BaseEstimator):
    """Stateless transformer: recordings -> stacked sliding windows."""

    def __init__(self, window=300, overlap=0.5):
        self.window = window
        self.overlap = overlap

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        if not X or not isinstance(X[0], Recording):
            raise ValueError("expected a non-empty list of Recording objects")
        windows, _, _ = segment_recordings(X, self.window, self.overlap)
        return windows

    def transform_labeled(self, recordings):
        """(windows, labels, origins) for pipelines that also need targets."""
        return segment_recordings(recordings, self.window, self.overlap)


class SequenceClassifier(ClassifierMixin, BaseEstimator):
    """Window classifier backed by one of the four sequence models.

    Parameters mirror the training protocol defaults: Adam with lr 0.001,
    batch 64, up to 300 epochs with early stopping after 50 epochs without
    validation-loss improvement. A fraction of the training windows is held
    out (stratified) as the early-stopping validation split.
    """

    def __init__(
        self,
        kind="bilstm",
        layer_widths=(64, 32),
        dropout_rate=0.5,
        learning_rate=0.001,
        batch_size=64,
        max_epochs=300,
        patience=50,
        validation_fraction=0.1,
        random_state=0,
    ):
        self.kind = kind
        self.layer_widths = layer_widths
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _val_split(self, y_idx, rng):
        """Stratified indices (train, val) with at least one val per class."""
        val = []
        for c in np.unique(y_idx):
            members = np.flatnonzero(y_idx == c)
            members = rng.permutation(members)
            k = max(1, int(round(self.validation_fraction * len(members))))
            val.extend(members[:k])
        val = np.sort(np.asarray(val))
        train = np.setdiff1d(np.arange(len(y_idx)), val)
        if len(train) == 0:
            raise ValueError("validation split consumed all training windows")
        return train, val

    def fit(self, X, y):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        X = check_windows(X)
        y = check_labels(y, len(X))
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        spec = ModelSpec(
            kind=self.kind,
            layer_widths=self.layer_widths,
            dropout_rate=self.dropout_rate,
            n_classes=len(self.classes_),
        )
        cfg = TrainConfig(
            max_epochs=self.max_epochs,
            patience=self.patience,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.random_state,
        )
        rng = np.random.default_rng(self.random_state)
        tr, va = self._val_split(y_idx, rng)
        self.model_, self.history_, self.stopped_epoch_ = train_one_model(
            spec, X[tr], y_idx[tr], X[va], y_idx[va], cfg, seed=self.random_state
        )
        self.input_shape_ = X.shape[1:]
        return self

    def decision_function(self, X):
        self._check_fitted()
        X = check_windows(X, self.input_shape_)
        return self.model_.forward(X, training=False)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this SequenceClassifier instance is not fitted yet")

    def validation_score(self, X, y):
        """Accuracy with the fitted label encoding (convenience for reports)."""
        self._check_fitted()
        X = check_windows(X, self.input_shape_)
        y_idx = np.searchsorted(self.classes_, check_labels(y, len(X)))
        _, acc, _ = evaluate(self.model_, X, y_idx)
        return acc
