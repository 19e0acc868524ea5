"""Gated recurrent sequence regressors built directly from cell equations.

Both cells consume one scalar assessment score per timestep, in term
order, and a small dense head maps the final hidden state to the
predicted total.  Gradients come from backpropagation through time,
written out by hand; grad_check in nn.core validates them in the tests.

LSTM cell, with [z_prev, x] the concatenated recurrent input:

    i = sigmoid(W_i [z_prev, x] + b_i)        input gate
    f = sigmoid(W_f [z_prev, x] + b_f)        forget gate
    o = sigmoid(W_o [z_prev, x] + b_o)        output gate
    g = tanh   (W_g [z_prev, x] + b_g)        candidate state
    s = f * s_prev + i * g                    cell state
    z = o * tanh(s)                           hidden state

GRU cell (no bias terms):

    h = sigmoid(A_h x + G_h z_prev)           update gate
    r = sigmoid(A_r x + G_r z_prev)           reset gate
    c = tanh   (A   x + r * (G z_prev))       candidate state
    z = h * z_prev + (1 - h) * c

Both start from zero initial state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingDivergedError, UsageError
from ..records import CHRONOLOGICAL_ORDER, DatasetView
from .core import (
    DenseNet,
    Standardizer,
    TrainConfig,
    clip_gradients,
    ensure_finite,
    init_weight,
    make_optimizer,
    minibatches,
    mse_loss,
    sigmoid,
)

HEAD_SIZES = (8,)  # hidden -> 8 -> 1
DEFAULT_HIDDEN_SIZE = 16
BPTT_CLIP_NORM = 5.0


@dataclass
class LstmParams:
    """Gate weight matrices (hidden, hidden+input) and bias vectors (hidden,)."""

    w_i: np.ndarray
    w_f: np.ndarray
    w_o: np.ndarray
    w_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @classmethod
    def init(cls, hidden_size: int, input_size: int, rng: np.random.Generator):
        fan_in = hidden_size + input_size
        return cls(
            *(init_weight(rng, hidden_size, fan_in) for _ in range(4)),
            *(np.zeros(hidden_size) for _ in range(4)),
        )

    @property
    def hidden_size(self) -> int:
        return self.w_i.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_i.shape[1] - self.w_i.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w_i, self.w_f, self.w_o, self.w_g,
                self.b_i, self.b_f, self.b_o, self.b_g]


@dataclass
class GruParams:
    """Input matrices (hidden, input) and recurrent matrices (hidden, hidden)."""

    a_h: np.ndarray
    a_r: np.ndarray
    a_c: np.ndarray
    g_h: np.ndarray
    g_r: np.ndarray
    g_c: np.ndarray

    @classmethod
    def init(cls, hidden_size: int, input_size: int, rng: np.random.Generator):
        return cls(
            init_weight(rng, hidden_size, input_size),
            init_weight(rng, hidden_size, input_size),
            init_weight(rng, hidden_size, input_size),
            init_weight(rng, hidden_size, hidden_size),
            init_weight(rng, hidden_size, hidden_size),
            init_weight(rng, hidden_size, hidden_size),
        )

    @property
    def hidden_size(self) -> int:
        return self.a_h.shape[0]

    @property
    def input_size(self) -> int:
        return self.a_h.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.a_h, self.a_r, self.a_c, self.g_h, self.g_r, self.g_c]


def lstm_cell_forward(params: LstmParams, x: np.ndarray,
                      z_prev: np.ndarray, s_prev: np.ndarray):
    """One LSTM step on a batch.  x (n, d); z_prev, s_prev (n, hidden).

    Returns (z, s, cache).
    """
    concat = np.concatenate([z_prev, x], axis=1)
    i = sigmoid(concat @ params.w_i.T + params.b_i)
    f = sigmoid(concat @ params.w_f.T + params.b_f)
    o = sigmoid(concat @ params.w_o.T + params.b_o)
    g = np.tanh(concat @ params.w_g.T + params.b_g)
    s = f * s_prev + i * g
    z = o * np.tanh(s)
    cache = (concat, s_prev, i, f, o, g, s)
    return z, s, cache


def lstm_cell_backward(params: LstmParams, cache, dz: np.ndarray, ds: np.ndarray):
    """Backprop one LSTM step.

    dz, ds are gradients flowing into this step's hidden and cell state.
    Returns (param_grads, dz_prev, ds_prev, dx) with param_grads ordered
    like LstmParams.params().
    """
    concat, s_prev, i, f, o, g, s = cache
    hidden = params.hidden_size
    ts = np.tanh(s)

    do = dz * ts
    ds_total = ds + dz * o * (1.0 - ts * ts)
    di = ds_total * g
    df = ds_total * s_prev
    dg = ds_total * i
    ds_prev = ds_total * f

    da_i = di * i * (1.0 - i)
    da_f = df * f * (1.0 - f)
    da_o = do * o * (1.0 - o)
    da_g = dg * (1.0 - g * g)

    grads = [
        da_i.T @ concat, da_f.T @ concat, da_o.T @ concat, da_g.T @ concat,
        da_i.sum(axis=0), da_f.sum(axis=0), da_o.sum(axis=0), da_g.sum(axis=0),
    ]
    dconcat = da_i @ params.w_i + da_f @ params.w_f + da_o @ params.w_o + da_g @ params.w_g
    return grads, dconcat[:, :hidden], ds_prev, dconcat[:, hidden:]


def gru_cell_forward(params: GruParams, x: np.ndarray, z_prev: np.ndarray):
    """One GRU step on a batch.  Returns (z, cache)."""
    h = sigmoid(x @ params.a_h.T + z_prev @ params.g_h.T)
    r = sigmoid(x @ params.a_r.T + z_prev @ params.g_r.T)
    u = z_prev @ params.g_c.T
    c = np.tanh(x @ params.a_c.T + r * u)
    z = h * z_prev + (1.0 - h) * c
    cache = (x, z_prev, h, r, u, c)
    return z, cache


def gru_cell_backward(params: GruParams, cache, dz: np.ndarray):
    """Backprop one GRU step.  Returns (param_grads, dz_prev, dx)."""
    x, z_prev, h, r, u, c = cache

    dh = dz * (z_prev - c)
    dc = dz * (1.0 - h)
    dz_prev = dz * h

    da_c = dc * (1.0 - c * c)
    dr = da_c * u
    du = da_c * r
    da_h = dh * h * (1.0 - h)
    da_r = dr * r * (1.0 - r)

    grads = [
        da_h.T @ x, da_r.T @ x, da_c.T @ x,
        da_h.T @ z_prev, da_r.T @ z_prev, du.T @ z_prev,
    ]
    dz_prev = dz_prev + du @ params.g_c + da_h @ params.g_h + da_r @ params.g_r
    dx = da_h @ params.a_h + da_r @ params.a_r + da_c @ params.a_c
    return grads, dz_prev, dx


class RecurrentRegressor:
    """A recurrent cell unrolled over assessment timesteps plus a dense head.

    sequence_order fixes which feature feeds which timestep; inputs are
    standardized with training-fold statistics before encoding.
    """

    def __init__(self, arch: str, cell, head: DenseNet,
                 sequence_order: tuple[str, ...],
                 standardizer: Standardizer | None = None):
        if arch not in ("lstm", "gru"):
            raise UsageError(f"unknown recurrent architecture {arch!r}")
        self.arch = arch
        self.cell = cell
        self.head = head
        self.sequence_order = tuple(sequence_order)
        self.standardizer = standardizer

    @classmethod
    def init(cls, arch: str, sequence_order: tuple[str, ...],
             hidden_size: int, rng: np.random.Generator) -> "RecurrentRegressor":
        if arch == "lstm":
            cell = LstmParams.init(hidden_size, 1, rng)
        elif arch == "gru":
            cell = GruParams.init(hidden_size, 1, rng)
        else:
            raise UsageError(f"unknown recurrent architecture {arch!r}")
        head = DenseNet.init([hidden_size, *HEAD_SIZES, 1], ["tanh", "identity"], rng)
        return cls(arch, cell, head, sequence_order)

    def params(self) -> list[np.ndarray]:
        return self.cell.params() + self.head.params()

    def forward(self, sequences: np.ndarray):
        """Run the unrolled cell and head on sequences (n, T, d_in).

        Returns (predictions (n,), cache).
        """
        sequences = np.asarray(sequences, dtype=np.float64)
        if sequences.ndim != 3:
            raise UsageError(f"sequences must be 3-d (n, T, d), got shape {sequences.shape}")
        n, T, _ = sequences.shape
        hidden = self.cell.hidden_size
        z = np.zeros((n, hidden))
        caches = []
        if self.arch == "lstm":
            s = np.zeros((n, hidden))
            for t in range(T):
                z, s, cache = lstm_cell_forward(self.cell, sequences[:, t, :], z, s)
                caches.append(cache)
        else:
            for t in range(T):
                z, cache = gru_cell_forward(self.cell, sequences[:, t, :], z)
                caches.append(cache)
        out, head_cache = self.head.forward(z)
        return out[:, 0], (caches, head_cache, n, T)

    def backward(self, cache, dpred: np.ndarray) -> list[np.ndarray]:
        """BPTT for gradients of all params given dLoss/dpred (n,)."""
        caches, head_cache, n, T = cache
        head_grads, dz = self.head.backward(head_cache, np.asarray(dpred).reshape(n, 1))
        cell_grads = [np.zeros_like(p) for p in self.cell.params()]
        if self.arch == "lstm":
            ds = np.zeros_like(dz)
            for t in range(T - 1, -1, -1):
                step, dz, ds, _ = lstm_cell_backward(self.cell, caches[t], dz, ds)
                for acc, g in zip(cell_grads, step):
                    acc += g
        else:
            for t in range(T - 1, -1, -1):
                step, dz, _ = gru_cell_backward(self.cell, caches[t], dz)
                for acc, g in zip(cell_grads, step):
                    acc += g
        return cell_grads + head_grads

    def encode(self, matrix: np.ndarray, feature_names: tuple[str, ...]) -> np.ndarray:
        """Standardize a view matrix and reorder columns into timesteps."""
        if self.standardizer is None:
            raise UsageError("model has no fitted standardizer")
        if len(feature_names) != matrix.shape[1]:
            raise UsageError("feature_names do not match matrix width")
        try:
            order = [feature_names.index(name) for name in self.sequence_order]
        except ValueError as exc:
            raise UsageError(
                f"matrix features {feature_names} lack sequence feature: {exc}"
            ) from None
        # standardizer stats live in sequence order, so reorder first
        return self.standardizer.transform(matrix[:, order])[:, :, None]

    def predict(self, matrix: np.ndarray,
                feature_names: tuple[str, ...] | None = None) -> np.ndarray:
        names = tuple(feature_names) if feature_names else self.sequence_order
        pred, _ = self.forward(self.encode(np.atleast_2d(matrix), names))
        return pred


def sequence_order_for(view_name: str) -> tuple[str, ...]:
    try:
        return CHRONOLOGICAL_ORDER[view_name]
    except KeyError:
        raise UsageError(f"no sequence order defined for view {view_name!r}") from None


def train_recurrent(view: DatasetView, arch: str, config: TrainConfig,
                    hidden_size: int = DEFAULT_HIDDEN_SIZE) -> tuple[RecurrentRegressor, list[float]]:
    """Fit a recurrent regressor on a view; returns (model, epoch loss trace).

    Targets stay in raw points; the head's output bias starts at the
    training-target mean so the optimizer only has to learn deviations.
    Gradients are clipped to a global norm of BPTT_CLIP_NORM.
    """
    config.validate()
    if view.n_rows == 0:
        raise UsageError(f"view {view.name!r} has no complete rows to train on")
    rng = np.random.default_rng(config.seed)
    model = RecurrentRegressor.init(arch, sequence_order_for(view.name), hidden_size, rng)
    order = [view.feature_names.index(name) for name in model.sequence_order]
    model.standardizer = Standardizer().fit(view.matrix[:, order])
    model.head.biases[-1][0] = float(view.targets.mean())

    sequences = model.encode(view.matrix, view.feature_names)
    y = view.targets
    opt = make_optimizer(config)
    params = model.params()
    clip = config.clip_norm if config.clip_norm is not None else BPTT_CLIP_NORM
    trace: list[float] = []
    for _ in range(config.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in minibatches(len(y), config.batch_size, rng):
            pred, cache = model.forward(sequences[idx])
            loss, dpred = mse_loss(pred, y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"{arch} training loss became non-finite")
            grads = model.backward(cache, dpred)
            for g in grads:
                ensure_finite(g, f"{arch} gradients")
            clip_gradients(grads, clip)
            opt.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / max(n_batches, 1))
    return model, trace
