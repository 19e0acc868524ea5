"""Estimation pipelines: feature source plus model, one name each.

Three families share the fit/predict contract:

  * bare regressors ("lr", "knn", "mlp", "rf", "et", "xgb") fit the
    view's raw feature matrix
  * VAE pipelines ("vae+lr", ...) standardize the training features, fit
    a VAE on them, and hand the posterior means to the regressor
  * sequence models ("lstm", "gru") feed the view's features to a
    recurrent cell one timestep per assessment in term order

Everything a pipeline learns (standardization statistics included) comes
from the rows passed to fit_pipeline, so cross-validation can hand it
training folds only.
"""

from __future__ import annotations

import numpy as np

from .config import Settings
from .errors import UsageError
from .nn.core import Standardizer, TrainConfig
from .nn.recurrent import RecurrentRegressor, train_recurrent
from .nn.vae import VaeModel, extract_latent, vae_train
from .records import DatasetView
from .regressors import REGRESSOR_KINDS, RegressorSpec, fit_regressor, regressor_from_state

VAE_PIPELINES = tuple(f"vae+{kind}" for kind in ("mlp", "lr", "et", "rf", "xgb", "knn"))
RECURRENT_PIPELINES = ("lstm", "gru")
RAW_PIPELINES = ("mlp", "lr", "et", "rf", "xgb", "knn")

ALL_PIPELINES = VAE_PIPELINES + RAW_PIPELINES + RECURRENT_PIPELINES

# The comparison sets reported per view: latent-feature pipelines and
# sequence models on the three-test view, direct pipelines elsewhere.
VIEW_PIPELINE_SETS = {
    "D1": VAE_PIPELINES + RECURRENT_PIPELINES,
    "D2-MTE": RAW_PIPELINES + RECURRENT_PIPELINES,
    "D2-ETE": RAW_PIPELINES + RECURRENT_PIPELINES,
}


def parse_pipeline_name(name: str) -> tuple[str | None, str]:
    """Split a pipeline name into (feature source, model)."""
    if name in RECURRENT_PIPELINES:
        return None, name
    if name in RAW_PIPELINES:
        return "raw", name
    if name.startswith("vae+"):
        kind = name[len("vae+"):]
        if kind in REGRESSOR_KINDS:
            return "vae", kind
    raise UsageError(f"unknown pipeline {name!r}; expected one of {sorted(ALL_PIPELINES)}")


def _regressor_spec(kind: str, settings: Settings, seed: int) -> RegressorSpec:
    hp: dict = {}
    if kind == "knn":
        hp["k"] = int(settings.get("train.knn_k"))
    elif kind in ("rf", "et"):
        hp["n_trees"] = int(settings.get("train.n_trees"))
        hp["max_depth"] = int(settings.get("train.max_depth"))
        hp["min_leaf"] = int(settings.get("train.min_leaf"))
    elif kind == "xgb":
        hp["n_stages"] = int(settings.get("train.gbt_stages"))
        hp["learning_rate"] = float(settings.get("train.gbt_learning_rate"))
        hp["max_depth"] = int(settings.get("train.gbt_depth"))
        hp["min_leaf"] = int(settings.get("train.min_leaf"))
    return RegressorSpec(kind, hp, seed=seed)


class RegressorPipeline:
    """A regressor fit directly on the view's features."""

    def __init__(self, name: str, kind: str, model, view_name: str,
                 feature_names: tuple[str, ...]):
        self.name = name
        self.kind = kind
        self.model = model
        self.view_name = view_name
        self.feature_names = feature_names

    @property
    def standardizer(self) -> Standardizer | None:
        return getattr(self.model, "standardizer", None)

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.model.predict(matrix)

    def to_state(self) -> dict:
        return {"family": "regressor", "kind": self.kind,
                "model": self.model.to_state()}

    @classmethod
    def from_state(cls, name: str, view_name: str,
                   feature_names: tuple[str, ...], state: dict) -> "RegressorPipeline":
        model = regressor_from_state(state["kind"], state["model"])
        return cls(name, state["kind"], model, view_name, feature_names)


class VaePipeline:
    """VAE latent means as features for a downstream regressor."""

    def __init__(self, name: str, kind: str, scaler: Standardizer,
                 vae: VaeModel, model, view_name: str,
                 feature_names: tuple[str, ...]):
        self.name = name
        self.kind = kind
        self.scaler = scaler
        self.vae = vae
        self.model = model
        self.view_name = view_name
        self.feature_names = feature_names

    @property
    def standardizer(self) -> Standardizer:
        return self.scaler

    def latent(self, matrix: np.ndarray) -> np.ndarray:
        return extract_latent(self.vae, self.scaler.transform(matrix), mode="mean")

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.model.predict(self.latent(matrix))

    def to_state(self) -> dict:
        return {
            "family": "vae+regressor",
            "kind": self.kind,
            "scaler": self.scaler.to_state(),
            "latent_dim": self.vae.latent_dim,
            "kl_weight": self.vae.kl_weight,
            "encoder": self.vae.encoder.to_state(),
            "decoder": self.vae.decoder.to_state(),
            "model": self.model.to_state(),
        }

    @classmethod
    def from_state(cls, name: str, view_name: str,
                   feature_names: tuple[str, ...], state: dict) -> "VaePipeline":
        from .nn.core import DenseNet

        vae = VaeModel(DenseNet.from_state(state["encoder"]),
                       DenseNet.from_state(state["decoder"]),
                       int(state["latent_dim"]), float(state["kl_weight"]))
        model = regressor_from_state(state["kind"], state["model"])
        return cls(name, state["kind"], Standardizer.from_state(state["scaler"]),
                   vae, model, view_name, feature_names)


class RecurrentPipeline:
    """LSTM or GRU sequence regressor over term-ordered assessments."""

    def __init__(self, name: str, model: RecurrentRegressor, view_name: str,
                 feature_names: tuple[str, ...]):
        self.name = name
        self.model = model
        self.view_name = view_name
        self.feature_names = feature_names

    @property
    def standardizer(self) -> Standardizer | None:
        return self.model.standardizer

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return self.model.predict(matrix, self.feature_names)

    def to_state(self) -> dict:
        cell = self.model.cell
        return {
            "family": "recurrent",
            "arch": self.model.arch,
            "cell": {name: arr.tolist()
                     for name, arr in zip(_cell_field_names(self.model.arch),
                                          cell.params())},
            "head": self.model.head.to_state(),
            "scaler": self.model.standardizer.to_state(),
            "sequence_order": list(self.model.sequence_order),
        }

    @classmethod
    def from_state(cls, name: str, view_name: str,
                   feature_names: tuple[str, ...], state: dict) -> "RecurrentPipeline":
        from .nn.core import DenseNet
        from .nn.recurrent import GruParams, LstmParams

        arch = state["arch"]
        arrays = [np.asarray(state["cell"][field], dtype=np.float64)
                  for field in _cell_field_names(arch)]
        cell = LstmParams(*arrays) if arch == "lstm" else GruParams(*arrays)
        model = RecurrentRegressor(
            arch, cell, DenseNet.from_state(state["head"]),
            tuple(state["sequence_order"]),
            Standardizer.from_state(state["scaler"]))
        return cls(name, model, view_name, feature_names)


def _cell_field_names(arch: str) -> tuple[str, ...]:
    if arch == "lstm":
        return ("w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g")
    return ("a_h", "a_r", "a_c", "g_h", "g_r", "g_c")


def fit_pipeline(name: str, view: DatasetView, settings: Settings | None = None,
                 seed: int = 0, train_config: TrainConfig | None = None):
    """Fit the named pipeline on a view's rows; returns a fitted pipeline.

    seed drives every stochastic choice (weight init, minibatch order,
    bootstrap draws, noise draws) so a rerun reproduces the fit exactly.
    """
    settings = settings or Settings()
    if view.n_rows == 0:
        raise UsageError(f"view {view.name!r} has no rows to fit on")
    source, model_name = parse_pipeline_name(name)
    config = train_config or settings.train_config()
    config = config.with_overrides(seed=seed)

    if source is None:
        model, _ = train_recurrent(
            view, model_name, config,
            hidden_size=int(settings.get("train.hidden_size")))
        return RecurrentPipeline(name, model, view.name, view.feature_names)

    if source == "raw":
        spec = _regressor_spec(model_name, settings, seed)
        model = fit_regressor(view.matrix, view.targets, spec, train_config=config)
        return RegressorPipeline(name, model_name, model, view.name, view.feature_names)

    scaler = Standardizer().fit(view.matrix)
    vae, _ = vae_train(
        scaler.transform(view.matrix),
        latent_dim=int(settings.get("train.latent_dim")),
        hidden_size=int(settings.get("train.hidden_size")),
        kl_weight=float(settings.get("train.kl_weight")),
        config=config)
    latents = extract_latent(vae, scaler.transform(view.matrix), mode="mean")
    spec = _regressor_spec(model_name, settings, seed)
    model = fit_regressor(latents, view.targets, spec, train_config=config)
    return VaePipeline(name, model_name, scaler, vae, model, view.name,
                       view.feature_names)


def pipeline_from_state(name: str, view_name: str, feature_names: tuple[str, ...],
                        state: dict):
    family = state.get("family")
    if family == "regressor":
        return RegressorPipeline.from_state(name, view_name, feature_names, state)
    if family == "vae+regressor":
        return VaePipeline.from_state(name, view_name, feature_names, state)
    if family == "recurrent":
        return RecurrentPipeline.from_state(name, view_name, feature_names, state)
    raise UsageError(f"unknown pipeline family {family!r}")
