"""Dense float64 array primitives with analytic gradients.

Everything here is a pure function of its inputs. All math runs in double
precision so that finite-difference gradient verification is decisive.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

PROB_FLOOR = 1e-15  # clamp for log() so confident-wrong predictions stay finite

ACTIVATIONS = ("sigmoid", "tanh", "relu")


class ShapeMismatchError(ValueError):
    """Operands have incompatible shapes."""


def as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def matmul(a, b) -> np.ndarray:
    """Row-major matrix product a @ b with an explicit inner-extent check."""
    a = as_f64(a)
    b = as_f64(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"cannot multiply {a.shape} by {b.shape}: inner extents differ"
        )
    return a @ b


def sigmoid(x) -> np.ndarray:
    # 0.5*tanh(x/2)+0.5 == logistic sigmoid; tanh saturates cleanly at +-1
    # with no exp overflow, and the identity keeps sigmoid(-x) == 1-sigmoid(x)
    # exact in floating point (tanh is odd bit-for-bit).
    return 0.5 * np.tanh(0.5 * as_f64(x)) + 0.5


def relu(x) -> np.ndarray:
    return np.maximum(as_f64(x), 0.0)


def activation(kind: str, x) -> np.ndarray:
    """Elementwise nonlinearity. kind is one of sigmoid|tanh|relu."""
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return np.tanh(as_f64(x))
    if kind == "relu":
        return relu(x)
    if kind == "linear":
        return as_f64(x).copy()
    raise ValueError(f"unknown activation kind {kind!r}")


def activation_grad(kind: str, x) -> np.ndarray:
    """Derivative of activation(kind, .) evaluated elementwise at x.

    relu'(0) is defined as 0 (any subgradient is valid; 0 is conventional).
    """
    x = as_f64(x)
    if kind == "sigmoid":
        s = sigmoid(x)
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "linear":
        return np.ones_like(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def softmax(logits) -> np.ndarray:
    """Row softmax, stabilized by per-row max subtraction."""
    z = as_f64(logits)
    z = z - z.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def softmax_crossentropy(logits, onehot) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy over the batch and its logit gradient.

    Returns (loss, grad) where grad = (softmax(logits) - onehot) / batch,
    the exact gradient of the mean loss. Each onehot row must contain a
    single 1 and otherwise zeros.
    """
    logits = as_f64(logits)
    onehot = as_f64(onehot)
    if logits.shape != onehot.shape:
        raise ShapeMismatchError(
            f"logits {logits.shape} and one-hot targets {onehot.shape} differ"
        )
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise ValueError("expected a batch x classes matrix with >= 2 classes")
    ok = (onehot.sum(axis=1) == 1.0) & np.all((onehot == 0.0) | (onehot == 1.0), axis=1)
    if not ok.all():
        raise ValueError(f"invalid one-hot row at index {int(np.argmin(ok))}")
    probs = softmax(logits)
    batch = logits.shape[0]
    picked = probs[onehot == 1.0]
    loss = float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
    grad = (probs - onehot) / batch
    return loss, grad


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"labels out of range 0..{n_classes - 1}")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x,
    analytic_grad,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic_grad and central differences of f.

    The relative error per coordinate is |analytic - numeric| divided by
    max(1e-12, |analytic| + |numeric|). NaN from f propagates as an error.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_f64(x).copy()
    analytic = as_f64(analytic_grad)
    if analytic.shape != x.shape:
        raise ShapeMismatchError(
            f"gradient shape {analytic.shape} does not match input {x.shape}"
        )
    flat = x.ravel()
    numeric = np.empty_like(flat)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = float(f(x))
        flat[k] = orig - eps
        fm = float(f(x))
        flat[k] = orig
        if np.isnan(fp) or np.isnan(fm):
            raise FloatingPointError(f"f returned NaN at coordinate {k}")
        numeric[k] = (fp - fm) / (2.0 * eps)
    a = analytic.ravel()
    denom = np.maximum(1e-12, np.abs(a) + np.abs(numeric))
    return float(np.max(np.abs(a - numeric) / denom))
