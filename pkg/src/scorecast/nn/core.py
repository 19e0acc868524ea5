"""Dense network numerics: activations, layers, losses, optimizers.

Everything here works on float64 numpy arrays with batches in rows.
Gradients are derived by hand and validated against central differences
(see grad_check); there is no autodiff.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericalError, TrainingDivergedError, UsageError


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def identity(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


# name -> (forward, derivative as a function of (pre-activation, activation))
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (relu, lambda z, a: (z > 0.0).astype(np.float64)),
    "identity": (identity, lambda z, a: np.ones_like(a)),
}


def ensure_finite(arr: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise TrainingDivergedError(f"non-finite values encountered in {context}")


def init_weight(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform init on +-1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


@dataclass
class TrainConfig:
    """Hyperparameters shared by every gradient-trained model."""

    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    optimizer: str = "adam"  # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None  # global gradient norm cap, None = off
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise UsageError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise UsageError(f"unknown optimizer {self.optimizer!r}")

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)


class SgdOptimizer:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class AdamOptimizer:
    """Adam with bias correction; denominator is sqrt(v_hat) + eps."""

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "sgd":
        return SgdOptimizer(config.learning_rate)
    return AdamOptimizer(config.learning_rate, config.beta1, config.beta2, config.eps)


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient 2*(pred - target)/n wrt pred."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise UsageError(f"shape mismatch in mse_loss: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = pred.size
    loss = float(np.sum(diff * diff) / n)
    return loss, 2.0 * diff / n


class DenseNet:
    """Fully connected stack.  weights[i] has shape (out, in); x is (n, d)."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 activations: Sequence[str]):
        if not (len(weights) == len(biases) == len(activations)):
            raise UsageError("layer count mismatch between weights/biases/activations")
        for name in activations:
            if name not in ACTIVATIONS:
                raise UsageError(f"unknown activation {name!r}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.activations = list(activations)

    @classmethod
    def init(cls, sizes: Sequence[int], activations: Sequence[str],
             rng: np.random.Generator) -> "DenseNet":
        """Build a net for layer sizes [d0, d1, ..., dk] with k layers."""
        if len(sizes) < 2 or len(activations) != len(sizes) - 1:
            raise UsageError("need len(sizes) >= 2 and one activation per layer")
        weights = [init_weight(rng, sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]
        biases = [np.zeros(sizes[i + 1]) for i in range(len(sizes) - 1)]
        return cls(weights, biases, activations)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def forward(self, x: np.ndarray):
        """Return (output, cache) for a batch x of shape (n, d_in)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.weights[0].shape[1]:
            raise UsageError(
                f"input has {x.shape[1]} features, layer expects {self.weights[0].shape[1]}"
            )
        cache = []
        a = x
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w.T + b
            out = ACTIVATIONS[name][0](z)
            cache.append((a, z, out))
            a = out
        return a, cache

    def predict(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        return out

    def backward(self, cache, grad_out: np.ndarray):
        """Backprop grad_out (n, d_out) through the cached forward pass.

        Returns (param_grads, grad_input) with param_grads ordered like
        params(): [dW0, db0, dW1, db1, ...].
        """
        grad = np.asarray(grad_out, dtype=np.float64)
        w_grads: list[np.ndarray] = [None] * len(self.weights)
        b_grads: list[np.ndarray] = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            a_in, z, a_out = cache[i]
            dz = grad * ACTIVATIONS[self.activations[i]][1](z, a_out)
            w_grads[i] = dz.T @ a_in
            b_grads[i] = dz.sum(axis=0)
            grad = dz @ self.weights[i]
        flat: list[np.ndarray] = []
        for wg, bg in zip(w_grads, b_grads):
            flat.extend((wg, bg))
        return flat, grad

    def params(self) -> list[np.ndarray]:
        flat: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            flat.extend((w, b))
        return flat

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights],
                        [b.copy() for b in self.biases],
                        list(self.activations))

    def to_state(self) -> dict:
        return {
            "activations": list(self.activations),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_state(cls, state: dict) -> "DenseNet":
        return cls([np.asarray(w, dtype=np.float64) for w in state["weights"]],
                   [np.asarray(b, dtype=np.float64) for b in state["biases"]],
                   state["activations"])


def grad_check(f: Callable[[list[np.ndarray]], tuple[float, list[np.ndarray]]],
               params: list[np.ndarray], epsilon: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    f maps the parameter list to (loss, grads) and must not mutate it.
    The relative discrepancy per coordinate is |a - n| / max(1, |a|, |n|).
    """
    _, analytic = f(params)
    worst = 0.0
    for k, p in enumerate(params):
        flat = p.reshape(-1)
        a_flat = np.asarray(analytic[k], dtype=np.float64).reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            up, _ = f(params)
            flat[idx] = orig - epsilon
            down, _ = f(params)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            a = float(a_flat[idx])
            gap = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, gap)
    return worst


class Standardizer:
    """Per-column zero-mean unit-variance scaling fit on training data only.

    Constant columns keep scale 1 so transform stays finite.
    """

    def __init__(self):
        self.mean_: np.ndarray | None = None
        self.scale_: np.ndarray | None = None

    def fit(self, x: np.ndarray) -> "Standardizer":
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[0] == 0:
            raise NumericalError("cannot standardize an empty matrix")
        self.mean_ = x.mean(axis=0)
        scale = x.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale_ = scale
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.mean_ is None:
            raise UsageError("standardizer used before fit")
        return (np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mean_) / self.scale_

    def fit_transform(self, x: np.ndarray) -> np.ndarray:
        return self.fit(x).transform(x)

    def to_state(self) -> dict:
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist()}

    @classmethod
    def from_state(cls, state: dict) -> "Standardizer":
        out = cls()
        out.mean_ = np.asarray(state["mean"], dtype=np.float64)
        out.scale_ = np.asarray(state["scale"], dtype=np.float64)
        return out


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Yield shuffled index batches covering range(n) once."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_dense_mse(net: DenseNet, x: np.ndarray, y: np.ndarray,
                    config: TrainConfig) -> list[float]:
    """Minibatch-train net on (x, y) under MSE; returns per-epoch mean loss.

    Aborts with TrainingDivergedError the moment a loss or gradient goes
    non-finite.
    """
    config.validate()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise UsageError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config)
    params = net.params()
    trace: list[float] = []
    for _ in range(config.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in minibatches(x.shape[0], config.batch_size, rng):
            out, cache = net.forward(x[idx])
            loss, dloss = mse_loss(out[:, 0], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError("training loss became non-finite")
            grads, _ = net.backward(cache, dloss[:, None])
            for g in grads:
                ensure_finite(g, "dense gradients")
            if config.clip_norm is not None:
                clip_gradients(grads, config.clip_norm)
            opt.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / max(n_batches, 1))
    return trace
