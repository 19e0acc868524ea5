from .core import (
    ACTIVATIONS,
    AdamOptimizer,
    DenseNet,
    SgdOptimizer,
    Standardizer,
    TrainConfig,
    grad_check,
    mse_loss,
    relu,
    sigmoid,
)

__all__ = [
    "ACTIVATIONS",
    "AdamOptimizer",
    "DenseNet",
    "SgdOptimizer",
    "Standardizer",
    "TrainConfig",
    "grad_check",
    "mse_loss",
    "relu",
    "sigmoid",
]
