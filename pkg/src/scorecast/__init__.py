"""Course score estimation from partial assessment records.

The library models a student's final score as a weighted composite of
assessment components, generates or ingests cohort CSVs, and compares
sequence models (LSTM/GRU), VAE latent features with classical
regressors, and direct regressors under shuffle-split cross-validation.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import Settings, build_settings
from .eda import correlation_matrix, gradient_map, histogram, pearson
from .evaluate import (
    CvReport,
    Metrics,
    compute_metrics,
    run_experiment_matrix,
    shuffle_split_cv,
    write_results_csv,
)
from .ingest import CohortFile, SynthSpec, generate_synthetic, parse_cohort, write_cohort
from .nn.core import DenseNet, Standardizer, TrainConfig, grad_check
from .nn.recurrent import RecurrentRegressor, train_recurrent
from .nn.vae import VaeModel, extract_latent, kl_divergence_general, vae_train
from .pipelines import ALL_PIPELINES, VIEW_PIPELINE_SETS, fit_pipeline
from .records import (
    CHRONOLOGICAL_ORDER,
    FEATURES,
    VIEW_FEATURES,
    AssessmentRecord,
    DatasetView,
    WeightVector,
    build_view,
    composite_score,
    default_weights,
)
from .regressors import RegressorSpec, fit_linear_regression, fit_regressor

__version__ = "0.1.0"

__all__ = [
    "ALL_PIPELINES",
    "AssessmentRecord",
    "CHRONOLOGICAL_ORDER",
    "CohortFile",
    "CvReport",
    "DatasetView",
    "DenseNet",
    "FEATURES",
    "Metrics",
    "RecurrentRegressor",
    "RegressorSpec",
    "Settings",
    "Standardizer",
    "SynthSpec",
    "TrainConfig",
    "VIEW_FEATURES",
    "VIEW_PIPELINE_SETS",
    "VaeModel",
    "WeightVector",
    "build_settings",
    "build_view",
    "composite_score",
    "compute_metrics",
    "correlation_matrix",
    "default_weights",
    "extract_latent",
    "fit_linear_regression",
    "fit_pipeline",
    "fit_regressor",
    "generate_synthetic",
    "grad_check",
    "gradient_map",
    "histogram",
    "kl_divergence_general",
    "load_checkpoint",
    "parse_cohort",
    "pearson",
    "run_experiment_matrix",
    "save_checkpoint",
    "shuffle_split_cv",
    "train_recurrent",
    "vae_train",
    "write_cohort",
    "write_results_csv",
]
