"""Flat key-value run configuration.

Settings come from three layers, later ones winning: built-in defaults,
an optional config file of `key = value` lines (# starts a comment), and
repeatable `--set key=value` style overrides.  Every key is declared in
DEFAULTS; unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import UsageError
from .nn.core import TrainConfig
from .records import FEATURES, WeightVector

DEFAULTS: dict[str, object] = {
    # composite weights, must sum to 1
    "weights.t1": 0.15,
    "weights.t2": 0.15,
    "weights.cw": 0.20,
    "weights.mte": 0.20,
    "weights.ete": 0.30,
    # per-feature maximum attainable points
    "maxima.t1": 100.0,
    "maxima.t2": 100.0,
    "maxima.cw": 100.0,
    "maxima.mte": 100.0,
    "maxima.ete": 100.0,
    # synthetic cohort generator
    "synth.n": 1000,
    "synth.seed": 7,
    "synth.noise_sd": 1.5,
    "synth.mean_frac": 0.58,   # feature mean as a fraction of its maximum
    "synth.sd_frac.t1": 0.10,  # feature sd as a fraction of its maximum
    "synth.sd_frac.t2": 0.10,
    "synth.sd_frac.cw": 0.08,
    "synth.sd_frac.mte": 0.14,
    "synth.sd_frac.ete": 0.20,
    "synth.corr.t1": 0.69,     # target correlation with the total
    "synth.corr.t2": 0.64,
    "synth.corr.cw": float("nan"),  # nan = no target, use default loading
    "synth.corr.mte": 0.88,
    "synth.corr.ete": 0.96,
    "synth.default_loading": 0.5,
    # gradient training
    "train.learning_rate": 1e-3,
    "train.epochs": 200,
    "train.batch_size": 32,
    "train.optimizer": "adam",
    "train.seed": 0,
    "train.hidden_size": 16,    # recurrent cell width
    "train.latent_dim": 2,
    "train.kl_weight": 1.0,
    "train.knn_k": 5,
    "train.n_trees": 100,
    "train.max_depth": 10,
    "train.gbt_stages": 100,
    "train.gbt_learning_rate": 0.1,
    "train.gbt_depth": 3,
    "train.min_leaf": 2,
    # cross-validation
    "eval.n_folds": 5,
    "eval.test_fraction": 0.2,
}


def _coerce(key: str, raw: str) -> object:
    """Parse raw text into the declared type of key."""
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {key!r}: {raw!r}") from None
    return raw


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read `key = value` lines; returns raw string values."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{line_no}: expected key = value, got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_override(text: str) -> tuple[str, str]:
    """Split one key=value override."""
    if "=" not in text:
        raise UsageError(f"override must look like key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


@dataclass
class Settings:
    """Resolved configuration; read values through get()."""

    values: dict[str, object] = field(default_factory=dict)

    def get(self, key: str):
        if key not in DEFAULTS:
            raise UsageError(f"unknown setting {key!r}")
        return self.values.get(key, DEFAULTS[key])

    def weights(self) -> WeightVector:
        return WeightVector.from_mapping(
            {name: float(self.get(f"weights.{name}")) for name in FEATURES})

    def maxima(self) -> dict[str, float]:
        return {name: float(self.get(f"maxima.{name}")) for name in FEATURES}

    def train_config(self, **overrides) -> TrainConfig:
        config = TrainConfig(
            learning_rate=float(self.get("train.learning_rate")),
            epochs=int(self.get("train.epochs")),
            batch_size=int(self.get("train.batch_size")),
            optimizer=str(self.get("train.optimizer")),
            seed=int(self.get("train.seed")),
        )
        return config.with_overrides(**overrides) if overrides else config


def build_settings(config_path: str | Path | None = None,
                   overrides: tuple[str, ...] = ()) -> Settings:
    """Layer defaults, an optional file, then key=value overrides."""
    values: dict[str, object] = {}
    if config_path is not None:
        for key, raw in parse_config_file(config_path).items():
            if key not in DEFAULTS:
                raise UsageError(f"unknown setting {key!r} in {config_path}")
            values[key] = _coerce(key, raw)
    for item in overrides:
        key, raw = parse_override(item)
        if key not in DEFAULTS:
            raise UsageError(f"unknown setting {key!r}")
        values[key] = _coerce(key, raw)
    settings = Settings(values)
    settings.weights()  # validates the weight sum eagerly
    return settings
