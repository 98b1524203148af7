"""Finite-difference verification of every backward pass.

Each check builds a tiny configuration, computes analytic gradients, and
compares them against central differences. Two double-precision realities
shape the scoring:

* gradient coordinates span many orders of magnitude (gate saturation
  attenuates some paths below 1e-8 while head weights sit near 1e-1), and a
  coordinate near 4e-9 cannot be certified to 1e-5 *relative* error by any
  central difference at loss scale O(1) -- the loss difference itself only
  carries ~4 significant digits. The denominator therefore gets a 1e-6
  scale floor (the same role as gradcheck atol in the major frameworks),
  which still detects absolute gradient defects down to ~1e-11;
* relu kinks make the one-sided analytic convention and the two-sided
  numeric estimate disagree when a pre-activation sits within one step of
  zero, so each coordinate is scored at a ladder of step sizes and keeps
  its best score. A genuinely wrong gradient fails at every step size.

Dropout is checked in training mode by replaying the cached mask, so the
1/(1-rate) scaling is part of the verified path.
"""

from __future__ import annotations

import numpy as np

from .layers import (
    BiLstmLayer,
    DenseParams,
    LstmLayer,
    ModelSpec,
    build_model,
    dense_backward,
    dense_forward,
    dropout_forward,
)
from .numerics import one_hot, softmax_crossentropy

TOLERANCE = 1e-5

_EPS_STEPS = (1e-6, 1e-5, 1e-4)
_SCALE_FLOOR = 1e-6


def _jitter_biases(layer_params, rng, scale=0.2):
    # zero-initialized biases make exact-zero relu pre-activations (hence
    # exact relu kinks, where central differences and the relu'(0) = 0
    # convention legitimately disagree) systematic; nudge biases off that set
    for p in layer_params:
        if p.ndim == 1:
            p += rng.uniform(-scale, scale, size=p.shape)


def fd_max_rel_error(f, x, analytic_grad, eps_steps=_EPS_STEPS) -> float:
    """Max over coordinates of the best-step central-difference error.

    Per coordinate: rel = |analytic - numeric| / max(1e-6, |analytic| +
    |numeric|), minimized over the step sizes; the max over coordinates is
    returned.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    analytic = np.asarray(analytic_grad, dtype=np.float64).ravel()
    flat = x.ravel()
    best = np.full(flat.size, np.inf)
    for eps in eps_steps:
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            fp = float(f(x))
            flat[k] = orig - eps
            fm = float(f(x))
            flat[k] = orig
            numeric = (fp - fm) / (2.0 * eps)
            rel = abs(analytic[k] - numeric) / max(
                _SCALE_FLOOR, abs(analytic[k]) + abs(numeric)
            )
            best[k] = min(best[k], rel)
    return float(best.max())


def check_dense(seed) -> float:
    rng = np.random.default_rng(seed)
    p = DenseParams(rng.standard_normal((3, 4)), rng.standard_normal(3), "relu")
    x = rng.standard_normal((3, 4))
    proj = rng.standard_normal((3, 3))
    dx, dW, db = dense_backward(x, p, proj)
    errs = [
        fd_max_rel_error(lambda v: np.sum(dense_forward(v, p) * proj), x, dx),
        fd_max_rel_error(
            lambda v: np.sum(dense_forward(x, DenseParams(v, p.b, p.activation)) * proj),
            p.W, dW,
        ),
        fd_max_rel_error(
            lambda v: np.sum(dense_forward(x, DenseParams(p.W, v, p.activation)) * proj),
            p.b, db,
        ),
    ]
    return max(errs)


def _layer_param_errors(layer_forward, layer, x, proj):
    """Check the input gradient and every parameter gradient of a stack."""
    layer_forward(x)
    dx = layer.backward(proj)
    errs = [fd_max_rel_error(lambda v: np.sum(layer_forward(v) * proj), x, dx)]
    for param, grad in zip(layer.parameters(), layer.gradients()):
        original = param.copy()

        def f(v, _p=param):
            _p[...] = v
            return np.sum(layer_forward(x) * proj)

        errs.append(fd_max_rel_error(f, original, grad))
        param[...] = original
    return max(errs)


class _Stack:
    def __init__(self, *layers):
        self.layers = layers

    def forward(self, v):
        out = v
        for layer in self.layers:
            out = layer.forward(out, training=True)
        return out

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def gradients(self):
        return [g for layer in self.layers for g in layer.gradients()]


def check_lstm_cell(seed) -> float:
    # single-step layer: exercises all four gate weight/bias gradients
    rng = np.random.default_rng(seed)
    layer = LstmLayer(3, 2, return_sequences=False, rng=rng)
    _jitter_biases(layer.parameters(), rng)
    x = rng.standard_normal((1, 2, 3))
    proj = rng.standard_normal((2, 2))
    return _layer_param_errors(lambda v: layer.forward(v, training=True), layer, x, proj)


def check_lstm_stack(seed) -> float:
    # 4 time steps through two stacked layers: exercises BPTT across steps
    rng = np.random.default_rng(seed)
    stack = _Stack(
        LstmLayer(3, 3, return_sequences=True, rng=rng),
        LstmLayer(3, 2, return_sequences=False, rng=rng),
    )
    _jitter_biases(stack.parameters(), rng)
    x = rng.standard_normal((4, 2, 3))
    proj = rng.standard_normal((2, 2))
    return _layer_param_errors(stack.forward, stack, x, proj)


def check_bilstm_stack(seed) -> float:
    rng = np.random.default_rng(seed)
    stack = _Stack(
        BiLstmLayer(3, 3, return_sequences=True, rng=rng),
        BiLstmLayer(6, 2, return_sequences=False, rng=rng),
    )
    _jitter_biases(stack.parameters(), rng)
    x = rng.standard_normal((4, 2, 3))
    proj = rng.standard_normal((2, 4))
    return _layer_param_errors(stack.forward, stack, x, proj)


def check_dropout(seed) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(64)
    proj = rng.standard_normal(64)
    _, mask = dropout_forward(x, 0.5, training=True, rng=rng)
    analytic = mask * proj  # backward multiplies by the same scaled mask
    return fd_max_rel_error(lambda v: np.sum(v * mask * proj), x, analytic)


def check_full_model(kind, seed) -> float:
    """Whole-network check with dropout masks frozen between evaluations."""
    rng = np.random.default_rng(seed)
    spec = ModelSpec(kind, layer_widths=(3, 2), dropout_rate=0.5)
    state = build_model(spec, (5, 3), seed=int(rng.integers(2**32)))
    _jitter_biases(state.parameters(), rng)
    batch = rng.standard_normal((2, 5, 3))
    onehot = one_hot(rng.integers(0, 4, size=2), 4)

    logits = state.forward(batch, training=True, rng=rng)  # draws the masks
    _, dlogits = softmax_crossentropy(logits, onehot)
    state.backward(dlogits)
    grads = [g.copy() for g in state.gradients()]

    def loss_now():
        lg = state.forward(batch, training=True, reuse_dropout=True)
        return softmax_crossentropy(lg, onehot)[0]

    worst = 0.0
    for param, grad in zip(state.parameters(), grads):
        original = param.copy()

        def f(v, _p=param):
            _p[...] = v
            return loss_now()

        worst = max(worst, fd_max_rel_error(f, original, grad))
        param[...] = original
    return worst


def run_suite(n_seeds: int = 5, base_seed: int = 0) -> dict[str, float]:
    """Max relative error per check across n_seeds seeds."""
    checks = {
        "dense": check_dense,
        "lstm_cell": check_lstm_cell,
        "lstm_stack_4step": check_lstm_stack,
        "bilstm_stack": check_bilstm_stack,
        "dropout_train": check_dropout,
    }
    results = {}
    for name, fn in checks.items():
        results[name] = max(fn(base_seed + s) for s in range(n_seeds))
    for kind in ("mlp", "lstm_fwd", "lstm_bwd", "bilstm"):
        results[f"model_{kind}"] = max(
            check_full_model(kind, base_seed + s) for s in range(n_seeds)
        )
    return results
