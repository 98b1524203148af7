"""The four model architectures with exact hand-derived forward/backward passes.

Layers cache what their backward pass needs; a forward call must precede the
matching backward call. Recurrent layers process time-major [T, batch, feat]
arrays internally so every per-step slice is contiguous; sigmoid-gate blocks
(forget/input/output) and the candidate block are kept in separate buffers
for the same reason. Input projections for the whole sequence are hoisted out
of the time loop into single large matrix products.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .numerics import activation, activation_grad, sigmoid

MODEL_KINDS = ("mlp", "lstm_fwd", "lstm_bwd", "bilstm")

_CKPT_MAGIC = b"NPCKPT1\n"


def _glorot(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))  # sign fix makes the factorization unique


def _sigmoid_inplace(z):
    # logistic via tanh: no exp overflow, single vectorized pass
    z *= 0.5
    np.tanh(z, out=z)
    z *= 0.5
    z += 0.5


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------


@dataclass
class DenseParams:
    W: np.ndarray  # [out, in]
    b: np.ndarray  # [out]
    activation: str = "linear"


def init_dense_params(n_in, n_out, activation_kind, rng) -> DenseParams:
    W = _glorot(rng, n_in, n_out, (n_out, n_in))
    return DenseParams(W, np.zeros(n_out), activation_kind)


def dense_forward(x, p: DenseParams) -> np.ndarray:
    """a = activation(x @ W.T + b), rowwise over the batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.W.shape[1]:
        raise ValueError(f"input {x.shape} does not match weights {p.W.shape}")
    return activation(p.activation, x @ p.W.T + p.b)


def dense_backward(x, p: DenseParams, grad_out):
    """Gradients (dx, dW, db) for dense_forward at input x."""
    x = np.asarray(x, dtype=np.float64)
    z = x @ p.W.T + p.b
    dz = np.asarray(grad_out) * activation_grad(p.activation, z)
    return dz @ p.W, dz.T @ x, dz.sum(axis=0)


class DenseLayer:
    def __init__(self, n_in, n_out, activation_kind, rng):
        self.p = init_dense_params(n_in, n_out, activation_kind, rng)
        self.dW = None
        self.db = None
        self._x = None
        self._z = None

    def forward(self, x, training=False, rng=None):
        z = x @ self.p.W.T + self.p.b
        if training:
            self._x = x
            self._z = z
        return activation(self.p.activation, z)

    def backward(self, grad_out):
        if self._z is None:
            raise RuntimeError("backward called without a cached training forward")
        dz = grad_out * activation_grad(self.p.activation, self._z)
        self.dW = dz.T @ self._x
        self.db = dz.sum(axis=0)
        dx = dz @ self.p.W
        self._x = self._z = None
        return dx

    def parameters(self):
        return [self.p.W, self.p.b]

    def gradients(self):
        return [self.dW, self.db]

    def param_names(self):
        return ["W", "b"]


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


class LstmParams:
    """Gate weights for one LSTM layer.

    Each gate g in {f, i, c, o} applies W_g [hidden, hidden+input] to the
    concatenation [h_prev, x_t] plus a bias b_g. Storage is packed for the
    compute path: sigmoid gates (f|i|o) share w_sig [hidden+input, 3*hidden]
    and the candidate has w_cand [hidden+input, hidden]; rows 0..hidden-1 are
    the h_prev part. The per-gate W_g/b_g accessors are writable views.
    """

    def __init__(self, n_in, hidden, w_sig, b_sig, w_cand, b_cand,
                 cell_activation="relu"):
        if cell_activation not in ("relu", "tanh"):
            raise ValueError(f"unsupported cell activation {cell_activation!r}")
        self.n_in = n_in
        self.hidden = hidden
        self.w_sig = w_sig
        self.b_sig = b_sig
        self.w_cand = w_cand
        self.b_cand = b_cand
        self.cell_activation = cell_activation

    # Spectral norm of the recurrent blocks at init. relu cell activations
    # over hundreds of steps make the h -> relu(W.h) feedback loop
    # supercritical under Glorot scaling once inputs reach O(1) (cell states
    # blow past 1e9 on a few percent of inputs, and training cannot recover);
    # scaled orthogonal recurrence bounds the loop while the input blocks
    # stay Glorot-uniform.
    RECURRENT_GAIN = 0.25

    @classmethod
    def init(cls, n_in, hidden, rng, cell_activation="relu"):
        fan_in = hidden + n_in
        w_sig = np.empty((fan_in, 3 * hidden))
        w_cand = np.empty((fan_in, hidden))
        w_sig[hidden:, :] = _glorot(rng, fan_in, hidden, (n_in, 3 * hidden))
        w_cand[hidden:, :] = _glorot(rng, fan_in, hidden, (n_in, hidden))
        g = cls.RECURRENT_GAIN
        for blk in range(3):
            w_sig[:hidden, blk * hidden : (blk + 1) * hidden] = g * _orthogonal(rng, hidden)
        w_cand[:hidden, :] = g * _orthogonal(rng, hidden)
        b_sig = np.zeros(3 * hidden)
        b_sig[:hidden] = 1.0  # forget-gate bias: keep memory open early on
        return cls(n_in, hidden, w_sig, b_sig, w_cand, np.zeros(hidden),
                   cell_activation)

    @classmethod
    def from_gates(cls, W_f, W_i, W_c, W_o, b_f=None, b_i=None, b_c=None,
                   b_o=None, cell_activation="relu"):
        W_f, W_i, W_c, W_o = (np.asarray(w, dtype=np.float64) for w in (W_f, W_i, W_c, W_o))
        if not (W_f.shape == W_i.shape == W_c.shape == W_o.shape):
            raise ValueError("all four gate weight shapes must be identical")
        hidden, total = W_f.shape
        n_in = total - hidden
        w_sig = np.concatenate([W_f.T, W_i.T, W_o.T], axis=1)
        b_sig = np.zeros(3 * hidden)
        for blk, b in enumerate((b_f, b_i, b_o)):
            if b is not None:
                b_sig[blk * hidden:(blk + 1) * hidden] = b
        w_cand = np.ascontiguousarray(W_c.T)
        b_cand = np.zeros(hidden) if b_c is None else np.asarray(b_c, dtype=np.float64)
        return cls(n_in, hidden, w_sig, b_sig, w_cand, b_cand, cell_activation)

    # per-gate views; f|i|o are column blocks of the packed sigmoid matrix
    @property
    def W_f(self):
        return self.w_sig[:, : self.hidden].T

    @property
    def W_i(self):
        return self.w_sig[:, self.hidden : 2 * self.hidden].T

    @property
    def W_o(self):
        return self.w_sig[:, 2 * self.hidden :].T

    @property
    def W_c(self):
        return self.w_cand.T

    @property
    def b_f(self):
        return self.b_sig[: self.hidden]

    @property
    def b_i(self):
        return self.b_sig[self.hidden : 2 * self.hidden]

    @property
    def b_o(self):
        return self.b_sig[2 * self.hidden :]

    @property
    def b_c(self):
        return self.b_cand


def lstm_cell_step(x_t, h_prev, c_prev, p: LstmParams):
    """One LSTM step on [h_prev, x_t]; returns (h_t, c_t).

    f = sigmoid(W_f.[h,x] + b_f); i = sigmoid(W_i.[h,x] + b_i)
    cand = act(W_c.[h,x] + b_c); c = f*c_prev + i*cand
    o = sigmoid(W_o.[h,x] + b_o); h = o * act(c)
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    squeeze = x_t.ndim == 1
    if squeeze:
        x_t, h_prev, c_prev = x_t[None], h_prev[None], c_prev[None]
    if x_t.shape[1] != p.n_in or h_prev.shape[1] != p.hidden:
        raise ValueError(
            f"step shapes {x_t.shape}/{h_prev.shape} do not match "
            f"params (in={p.n_in}, hidden={p.hidden})"
        )
    u = np.concatenate([h_prev, x_t], axis=1)
    f = sigmoid(u @ p.W_f.T + p.b_f)
    i = sigmoid(u @ p.W_i.T + p.b_i)
    cand = activation(p.cell_activation, u @ p.W_c.T + p.b_c)
    c = f * c_prev + i * cand
    o = sigmoid(u @ p.W_o.T + p.b_o)
    h = o * activation(p.cell_activation, c)
    if squeeze:
        return h[0], c[0]
    return h, c


class LstmLayer:
    """Recurrence over a [T, batch, n_in] sequence with h0 = c0 = 0."""

    def __init__(self, n_in, hidden, return_sequences, rng, cell_activation="relu"):
        self.p = LstmParams.init(n_in, hidden, rng, cell_activation)
        self.return_sequences = return_sequences
        self.d_w_sig = None
        self.d_b_sig = None
        self.d_w_cand = None
        self.d_b_cand = None
        self._cache = None

    def forward(self, x, training=False, rng=None):
        p = self.p
        h = p.hidden
        T, B, n_in = x.shape
        if n_in != p.n_in:
            raise ValueError(f"sequence features {n_in} != layer input {p.n_in}")
        relu_cell = p.cell_activation == "relu"
        # hoist input projections for every step out of the loop
        flat = x.reshape(T * B, n_in)
        Zs = (flat @ p.w_sig[h:, :]).reshape(T, B, 3 * h)
        Zs += p.b_sig
        Zc = (flat @ p.w_cand[h:, :]).reshape(T, B, h)
        Zc += p.b_cand
        wh_sig = p.w_sig[:h, :]
        wh_cand = p.w_cand[:h, :]
        C = np.empty((T, B, h))
        H = np.empty((T, B, h))
        GC = np.empty((T, B, h))  # cell-activation of c_t, reused in backward
        ht = np.zeros((B, h))
        ct = np.zeros((B, h))
        for t in range(T):
            zs = Zs[t]
            zs += ht @ wh_sig
            _sigmoid_inplace(zs)
            zc = Zc[t]
            zc += ht @ wh_cand
            if relu_cell:
                np.maximum(zc, 0.0, out=zc)
            else:
                np.tanh(zc, out=zc)
            ctv = C[t]
            np.multiply(zs[:, :h], ct, out=ctv)  # forget * c_prev
            ctv += zs[:, h : 2 * h] * zc  # + input * candidate
            gc = GC[t]
            if relu_cell:
                np.maximum(ctv, 0.0, out=gc)
            else:
                np.tanh(ctv, out=gc)
            htv = H[t]
            np.multiply(zs[:, 2 * h :], gc, out=htv)
            ht = htv
            ct = ctv
        if training:
            self._cache = (x, Zs, Zc, C, H, GC)
        return H if self.return_sequences else H[-1]

    def backward(self, grad_out):
        if self._cache is None:
            raise RuntimeError("backward called without a cached training forward")
        p = self.p
        h = p.hidden
        x, Gs, Gc, C, H, GC = self._cache
        T, B, n_in = x.shape
        relu_cell = p.cell_activation == "relu"
        wh_sig_T = np.ascontiguousarray(p.w_sig[:h, :].T)
        wh_cand_T = np.ascontiguousarray(p.w_cand[:h, :].T)
        dZs = np.empty((T, B, 3 * h))
        dZc = np.empty((T, B, h))
        if self.return_sequences:
            dh = grad_out[T - 1].copy()
        else:
            dh = grad_out.copy()
        dc = np.zeros((B, h))
        zeros = np.zeros((B, h))
        for t in range(T - 1, -1, -1):
            gs = Gs[t]
            f = gs[:, :h]
            i = gs[:, h : 2 * h]
            o = gs[:, 2 * h :]
            cand = Gc[t]
            ct = C[t]
            gc = GC[t]
            do = dh * gc
            dct = dh * o
            if relu_cell:
                dct *= ct > 0
            else:
                dct *= 1.0 - gc * gc
            dct += dc
            cprev = C[t - 1] if t > 0 else zeros
            dzs = dZs[t]
            np.multiply(dct, cprev, out=dzs[:, :h])
            np.multiply(dct, cand, out=dzs[:, h : 2 * h])
            dzs[:, 2 * h :] = do
            dzs *= gs
            dzs *= 1.0 - gs  # sigmoid' = s(1-s) for all three blocks at once
            dzc = dZc[t]
            np.multiply(dct, i, out=dzc)
            if relu_cell:
                dzc *= cand > 0
            else:
                dzc *= 1.0 - cand * cand
            dc = dct * f
            dh = dzs @ wh_sig_T
            dh += dzc @ wh_cand_T
            if self.return_sequences and t > 0:
                dh += grad_out[t - 1]
        hprev = np.empty((T, B, h))
        hprev[0] = 0.0
        hprev[1:] = H[:-1]
        hp_flat = hprev.reshape(T * B, h)
        x_flat = x.reshape(T * B, n_in)
        dzs_flat = dZs.reshape(T * B, 3 * h)
        dzc_flat = dZc.reshape(T * B, h)
        self.d_w_sig = np.empty_like(p.w_sig)
        self.d_w_sig[:h, :] = hp_flat.T @ dzs_flat
        self.d_w_sig[h:, :] = x_flat.T @ dzs_flat
        self.d_b_sig = dzs_flat.sum(axis=0)
        self.d_w_cand = np.empty_like(p.w_cand)
        self.d_w_cand[:h, :] = hp_flat.T @ dzc_flat
        self.d_w_cand[h:, :] = x_flat.T @ dzc_flat
        self.d_b_cand = dzc_flat.sum(axis=0)
        dx = dzs_flat @ p.w_sig[h:, :].T
        dx += dzc_flat @ p.w_cand[h:, :].T
        self._cache = None
        return dx.reshape(T, B, n_in)

    def parameters(self):
        p = self.p
        return [p.w_sig, p.b_sig, p.w_cand, p.b_cand]

    def gradients(self):
        return [self.d_w_sig, self.d_b_sig, self.d_w_cand, self.d_b_cand]

    def param_names(self):
        return ["w_sig", "b_sig", "w_cand", "b_cand"]


def lstm_layer_forward(seq, p: LstmParams, return_sequences: bool):
    """Run an LSTM over a batch-major [batch, T, n_in] sequence, h0 = c0 = 0.

    Returns [batch, T, hidden] when return_sequences else [batch, hidden].
    """
    seq = np.asarray(seq, dtype=np.float64)
    layer = LstmLayer.__new__(LstmLayer)
    layer.p = p
    layer.return_sequences = return_sequences
    layer._cache = None
    out = layer.forward(np.ascontiguousarray(seq.transpose(1, 0, 2)))
    return np.ascontiguousarray(out.transpose(1, 0, 2)) if return_sequences else out


class BiLstmLayer:
    """Forward and time-reversed LSTM branches, features concatenated.

    The backward branch runs the plain forward recurrence on the reversed
    sequence; with return_sequences its output is re-reversed so step t lines
    up across branches. Forward features come first in the concatenation.
    """

    def __init__(self, n_in, hidden, return_sequences, rng, cell_activation="relu"):
        self.fwd = LstmLayer(n_in, hidden, return_sequences, rng, cell_activation)
        self.bwd = LstmLayer(n_in, hidden, return_sequences, rng, cell_activation)
        self.return_sequences = return_sequences

    def forward(self, x, training=False, rng=None):
        yf = self.fwd.forward(x, training)
        yb = self.bwd.forward(x[::-1].copy(), training)
        if self.return_sequences:
            return np.concatenate([yf, yb[::-1]], axis=2)
        return np.concatenate([yf, yb], axis=1)

    def backward(self, grad_out):
        h = self.fwd.p.hidden
        if self.return_sequences:
            gf = grad_out[:, :, :h]
            gb = np.ascontiguousarray(grad_out[::-1, :, h:])
        else:
            gf = grad_out[:, :h]
            gb = grad_out[:, h:]
        dx = self.fwd.backward(np.ascontiguousarray(gf))
        dxb = self.bwd.backward(gb)
        return dx + dxb[::-1]

    def parameters(self):
        return self.fwd.parameters() + self.bwd.parameters()

    def gradients(self):
        return self.fwd.gradients() + self.bwd.gradients()

    def param_names(self):
        return [f"fwd.{n}" for n in self.fwd.param_names()] + [
            f"bwd.{n}" for n in self.bwd.param_names()
        ]


def bilstm_forward(seq, p_fwd: LstmParams, p_bwd: LstmParams, return_sequences: bool):
    """Bidirectional pass over a batch-major sequence, output width 2*hidden."""
    if p_fwd.hidden != p_bwd.hidden:
        raise ValueError(
            f"branch widths differ: {p_fwd.hidden} vs {p_bwd.hidden}"
        )
    seq = np.asarray(seq, dtype=np.float64)
    yf = lstm_layer_forward(seq, p_fwd, return_sequences)
    yb = lstm_layer_forward(seq[:, ::-1, :], p_bwd, return_sequences)
    if return_sequences:
        return np.concatenate([yf, yb[:, ::-1, :]], axis=2)
    return np.concatenate([yf, yb], axis=1)


# ---------------------------------------------------------------------------
# dropout
# ---------------------------------------------------------------------------


def dropout_forward(x, rate, training, rng):
    """Inverted dropout: zero units with probability rate, scale survivors.

    Returns (y, mask) where mask already carries the 1/(1-rate) scaling, so
    backward is a plain elementwise product with the same mask. At inference
    (training=False) this is the identity and mask is all ones.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x.copy(), np.ones_like(x)
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


class DropoutLayer:
    def __init__(self, rate):
        if not 0 <= rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.mask = None

    def forward(self, x, training=False, rng=None, reuse_mask=False):
        if not training or self.rate == 0.0:
            self.mask = None
            return x
        if not reuse_mask or self.mask is None or self.mask.shape != x.shape:
            self.mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self.mask

    def backward(self, grad_out):
        if self.mask is None:
            return grad_out
        return grad_out * self.mask

    def parameters(self):
        return []

    def gradients(self):
        return []

    def param_names(self):
        return []


# ---------------------------------------------------------------------------
# model assembly
# ---------------------------------------------------------------------------


@dataclass
class ModelSpec:
    kind: str
    layer_widths: tuple = (64, 32)
    dropout_rate: float = 0.5
    n_classes: int = 4

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        self.layer_widths = tuple(int(w) for w in self.layer_widths)
        if any(w <= 0 for w in self.layer_widths):
            raise ValueError("layer widths must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")


class ModelState:
    """A built model: ordered layers plus the spec and input shape."""

    def __init__(self, spec: ModelSpec, input_shape, layers, reverse_input):
        self.spec = spec
        self.input_shape = tuple(input_shape)  # (T, channels)
        self.layers = layers
        self.reverse_input = reverse_input

    def forward(self, windows, training=False, rng=None, reuse_dropout=False):
        """Logits for a [batch, T, channels] array of windows."""
        x = np.asarray(windows, dtype=np.float64)
        if x.ndim != 3 or x.shape[1:] != self.input_shape:
            raise ValueError(
                f"expected windows of shape (batch, {self.input_shape[0]}, "
                f"{self.input_shape[1]}), got {x.shape}"
            )
        if training and rng is None and self.spec.dropout_rate > 0 and not reuse_dropout:
            raise ValueError("training forward needs an rng for dropout")
        if self.spec.kind == "mlp":
            x = x.reshape(x.shape[0], -1)
        else:
            x = np.ascontiguousarray(x.transpose(1, 0, 2))
            if self.reverse_input:
                x = x[::-1].copy()
        for layer in self.layers:
            if isinstance(layer, DropoutLayer):
                x = layer.forward(x, training, rng, reuse_mask=reuse_dropout)
            else:
                x = layer.forward(x, training, rng)
        return x

    def backward(self, grad_logits):
        """Backpropagate through the cached forward; grads land in each layer."""
        g = np.asarray(grad_logits, dtype=np.float64)
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        return out

    def gradients(self):
        out = []
        for layer in self.layers:
            out.extend(layer.gradients())
        return out

    def named_parameters(self):
        out = []
        for li, layer in enumerate(self.layers):
            for name, arr in zip(layer.param_names(), layer.parameters()):
                out.append((f"layer{li}.{name}", arr))
        return out

    @property
    def param_count(self):
        return sum(p.size for p in self.parameters())

    def copy_parameters(self):
        return [p.copy() for p in self.parameters()]

    def load_parameters(self, arrays):
        params = self.parameters()
        if len(arrays) != len(params):
            raise ValueError("parameter list length mismatch")
        for dst, src in zip(params, arrays):
            if dst.shape != src.shape:
                raise ValueError(f"parameter shape {src.shape} != {dst.shape}")
            dst[...] = src

    def predict_classes(self, windows):
        return np.argmax(self.forward(windows, training=False), axis=1)


def build_model(spec: ModelSpec, input_shape, seed: int) -> ModelState:
    """Instantiate a model for [T, channels] windows with seeded init.

    mlp:       dense(w1, relu) -> dense(w2, relu) -> dropout -> dense(C)
    lstm_*:    lstm(w1, sequences) -> lstm(w2, final) -> dropout -> dense(C)
    bilstm:    two stacked bidirectional layers (concat merge, so layer 2
               consumes 2*w1 features and emits 2*w2) -> dropout -> dense(C)
    lstm_bwd differs from lstm_fwd only by time-reversing every input window.
    Weights are Glorot-uniform; biases zero except forget gates at 1.
    """
    T, channels = input_shape
    w1, w2 = spec.layer_widths
    rng = np.random.default_rng(seed)
    kind = spec.kind
    if kind == "mlp":
        layers = [
            DenseLayer(T * channels, w1, "relu", rng),
            DenseLayer(w1, w2, "relu", rng),
            DropoutLayer(spec.dropout_rate),
            DenseLayer(w2, spec.n_classes, "linear", rng),
        ]
    elif kind in ("lstm_fwd", "lstm_bwd"):
        layers = [
            LstmLayer(channels, w1, True, rng),
            LstmLayer(w1, w2, False, rng),
            DropoutLayer(spec.dropout_rate),
            DenseLayer(w2, spec.n_classes, "linear", rng),
        ]
    else:  # bilstm
        layers = [
            BiLstmLayer(channels, w1, True, rng),
            BiLstmLayer(2 * w1, w2, False, rng),
            DropoutLayer(spec.dropout_rate),
            DenseLayer(2 * w2, spec.n_classes, "linear", rng),
        ]
    return ModelState(spec, input_shape, layers, reverse_input=kind == "lstm_bwd")


def model_forward(state: ModelState, batch, training=False, rng=None):
    return state.forward(batch, training=training, rng=rng)


def model_backward(state: ModelState, grad_logits):
    state.backward(grad_logits)
    return state.gradients()


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, state: ModelState):
    """Versioned binary container: JSON header + raw little-endian float64.

    Writing the same model twice produces identical bytes, and a write/read
    round trip restores parameters bit-exactly.
    """
    named = state.named_parameters()
    header = {
        "format": "nirspain-checkpoint",
        "version": 1,
        "spec": {
            "kind": state.spec.kind,
            "layer_widths": list(state.spec.layer_widths),
            "dropout_rate": state.spec.dropout_rate,
            "n_classes": state.spec.n_classes,
        },
        "input_shape": list(state.input_shape),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in named],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in named:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelState:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise ValueError(f"{path} is not a model checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        spec = ModelSpec(
            kind=header["spec"]["kind"],
            layer_widths=tuple(header["spec"]["layer_widths"]),
            dropout_rate=header["spec"]["dropout_rate"],
            n_classes=header["spec"]["n_classes"],
        )
        state = build_model(spec, tuple(header["input_shape"]), seed=0)
        arrays = []
        for meta in header["arrays"]:
            shape = tuple(meta["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * n)
            arrays.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
        state.load_parameters(arrays)
    return state
