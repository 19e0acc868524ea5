"""Classical regressors behind one fit/predict contract.

Six model kinds cover the comparison matrix: ordinary least squares
("lr"), k-nearest neighbours ("knn"), a dense network ("mlp"), a random
forest ("rf"), extremely randomized trees ("et"), and gradient boosted
trees ("xgb").  fit_regressor dispatches on a RegressorSpec and returns
an object exposing predict(x) in raw score points.

Distance- and gradient-based kinds standardize features with statistics
from the rows they were fit on; tree kinds split on raw values (their
splits are scale invariant).  Nothing here ever sees evaluation rows at
fit time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .nn.core import DenseNet, Standardizer, TrainConfig, train_dense_mse
from .trees import (
    Forest,
    GradientBoostedTrees,
    fit_forest,
    fit_gbt,
    rf_max_features,
)

REGRESSOR_KINDS = ("lr", "knn", "mlp", "rf", "et", "xgb")

MLP_HIDDEN_SIZES = (32, 16)
RIDGE_FALLBACK = 1e-8


@dataclass
class RegressorSpec:
    """Which model to fit, with kind-specific hyperparameter overrides."""

    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in REGRESSOR_KINDS:
            raise UsageError(
                f"unknown regressor kind {self.kind!r}; expected one of {REGRESSOR_KINDS}"
            )


def _as_xy(x: np.ndarray, y: np.ndarray):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise UsageError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] == 0:
        raise UsageError("cannot fit on zero rows")
    return x, y


def _check_width(x: np.ndarray, expected: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != expected:
        raise UsageError(f"expected {expected} features, got {x.shape[1]}")
    return x


class LinearModel:
    """OLS fit by the normal equations; raw-unit coefficients + intercept."""

    kind = "lr"

    def __init__(self, coef: np.ndarray, intercept: float,
                 standardizer: Standardizer | None = None):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.standardizer = standardizer

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = _check_width(x, len(self.coef))
        return x @ self.coef + self.intercept

    def to_state(self) -> dict:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_state(cls, state: dict) -> "LinearModel":
        return cls(np.asarray(state["coef"]), state["intercept"])


def fit_linear_regression(x: np.ndarray, y: np.ndarray) -> LinearModel:
    """Solve (A^T A) beta = A^T y for A = [x | 1].

    Singular or numerically unusable normal equations fall back to a tiny
    ridge term on the Gram diagonal.
    """
    x, y = _as_xy(x, y)
    design = np.column_stack([x, np.ones(x.shape[0])])
    gram = design.T @ design
    rhs = design.T @ y
    try:
        beta = np.linalg.solve(gram, rhs)
        if not np.all(np.isfinite(beta)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        beta = np.linalg.solve(gram + RIDGE_FALLBACK * np.eye(gram.shape[0]), rhs)
    model = LinearModel(beta[:-1], beta[-1])
    model.standardizer = Standardizer().fit(x)
    return model


class KnnModel:
    """Mean of the k nearest training targets, Euclidean on standardized rows.

    Distance ties resolve toward the lower training index (the stored row
    order), keeping predictions deterministic.
    """

    kind = "knn"

    def __init__(self, x_scaled: np.ndarray, y: np.ndarray, k: int,
                 standardizer: Standardizer):
        if k < 1 or k > x_scaled.shape[0]:
            raise UsageError(f"k must be in [1, {x_scaled.shape[0]}], got {k}")
        self.x_scaled = x_scaled
        self.y = y
        self.k = k
        self.standardizer = standardizer

    def predict(self, x: np.ndarray, k: int | None = None) -> np.ndarray:
        k = self.k if k is None else k
        if k < 1 or k > self.x_scaled.shape[0]:
            raise UsageError(f"k must be in [1, {self.x_scaled.shape[0]}], got {k}")
        q = self.standardizer.transform(_check_width(x, self.x_scaled.shape[1]))
        out = np.empty(q.shape[0])
        for i, row in enumerate(q):
            dist = np.sqrt(np.sum((self.x_scaled - row) ** 2, axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            out[i] = self.y[nearest].mean()
        return out

    def to_state(self) -> dict:
        return {
            "k": self.k,
            "x_scaled": self.x_scaled.tolist(),
            "y": self.y.tolist(),
            "standardizer": self.standardizer.to_state(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "KnnModel":
        return cls(np.asarray(state["x_scaled"], dtype=np.float64),
                   np.asarray(state["y"], dtype=np.float64),
                   int(state["k"]),
                   Standardizer.from_state(state["standardizer"]))


def fit_knn(x: np.ndarray, y: np.ndarray, k: int = 5) -> KnnModel:
    x, y = _as_xy(x, y)
    scaler = Standardizer().fit(x)
    return KnnModel(scaler.transform(x), y.copy(), k, scaler)


class MlpModel:
    """Dense network regressor on standardized features, raw-point targets."""

    kind = "mlp"

    def __init__(self, net: DenseNet, standardizer: Standardizer):
        self.net = net
        self.standardizer = standardizer

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = _check_width(x, self.net.layer_sizes[0])
        return self.net.predict(self.standardizer.transform(x))[:, 0]

    def to_state(self) -> dict:
        return {
            "net": self.net.to_state(),
            "standardizer": self.standardizer.to_state(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "MlpModel":
        return cls(DenseNet.from_state(state["net"]),
                   Standardizer.from_state(state["standardizer"]))


def fit_mlp(x: np.ndarray, y: np.ndarray, config: TrainConfig,
            hidden_sizes: tuple[int, ...] = MLP_HIDDEN_SIZES) -> MlpModel:
    """Train a relu stack (d -> 32 -> 16 -> 1 by default) under MSE.

    The output bias starts at the target mean so training only has to fit
    deviations around it.
    """
    x, y = _as_xy(x, y)
    scaler = Standardizer().fit(x)
    rng = np.random.default_rng(config.seed)
    sizes = [x.shape[1], *hidden_sizes, 1]
    activations = ["relu"] * len(hidden_sizes) + ["identity"]
    net = DenseNet.init(sizes, activations, rng)
    net.biases[-1][0] = float(y.mean())
    train_dense_mse(net, scaler.transform(x), y, config)
    return MlpModel(net, scaler)


class _TreeEnsembleModel:
    def __init__(self, ensemble, n_features: int):
        self.ensemble = ensemble
        self.n_features = n_features
        self.standardizer: Standardizer | None = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.ensemble.predict(_check_width(x, self.n_features))

    def to_state(self) -> dict:
        return {"n_features": self.n_features, "ensemble": self.ensemble.to_state()}


class ForestModel(_TreeEnsembleModel):
    kind = "rf"

    @classmethod
    def from_state(cls, state: dict) -> "ForestModel":
        return cls(Forest.from_state(state["ensemble"]), int(state["n_features"]))


class ExtraTreesModel(_TreeEnsembleModel):
    kind = "et"

    @classmethod
    def from_state(cls, state: dict) -> "ExtraTreesModel":
        return cls(Forest.from_state(state["ensemble"]), int(state["n_features"]))


class GbtModel(_TreeEnsembleModel):
    kind = "xgb"

    @classmethod
    def from_state(cls, state: dict) -> "GbtModel":
        return cls(GradientBoostedTrees.from_state(state["ensemble"]),
                   int(state["n_features"]))


def fit_regressor(x: np.ndarray, y: np.ndarray, spec: RegressorSpec,
                  train_config: TrainConfig | None = None):
    """Fit the model named by spec on (x, y) and return it."""
    x, y = _as_xy(x, y)
    hp = dict(spec.hyperparameters)
    kind = spec.kind

    if kind == "lr":
        return fit_linear_regression(x, y)

    if kind == "knn":
        return fit_knn(x, y, k=int(hp.get("k", 5)))

    if kind == "mlp":
        config = (train_config or TrainConfig()).with_overrides(seed=spec.seed)
        hidden = tuple(hp.get("hidden_sizes", MLP_HIDDEN_SIZES))
        return fit_mlp(x, y, config, hidden_sizes=hidden)

    n_trees = int(hp.get("n_trees", 100))
    max_depth = int(hp.get("max_depth", 10))
    min_leaf = int(hp.get("min_leaf", 2))

    if kind == "rf":
        forest = fit_forest(
            x, y, n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf,
            policy="exhaustive", bootstrap=bool(hp.get("bootstrap", True)),
            max_features=int(hp.get("max_features", rf_max_features(x.shape[1]))),
            seed=spec.seed)
        model = ForestModel(forest, x.shape[1])
    elif kind == "et":
        forest = fit_forest(
            x, y, n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf,
            policy="random", bootstrap=False, max_features=None, seed=spec.seed)
        model = ExtraTreesModel(forest, x.shape[1])
    elif kind == "xgb":
        gbt = fit_gbt(
            x, y, n_stages=int(hp.get("n_stages", 100)),
            learning_rate=float(hp.get("learning_rate", 0.1)),
            max_depth=int(hp.get("max_depth", 3)), min_leaf=min_leaf,
            seed=spec.seed)
        model = GbtModel(gbt, x.shape[1])
    else:  # pragma: no cover - guarded by RegressorSpec
        raise UsageError(f"unknown regressor kind {kind!r}")

    model.standardizer = Standardizer().fit(x)
    return model


MODEL_CLASSES = {
    "lr": LinearModel,
    "knn": KnnModel,
    "mlp": MlpModel,
    "rf": ForestModel,
    "et": ExtraTreesModel,
    "xgb": GbtModel,
}


def regressor_from_state(kind: str, state: dict):
    if kind not in MODEL_CLASSES:
        raise UsageError(f"unknown regressor kind {kind!r}")
    return MODEL_CLASSES[kind].from_state(state)
