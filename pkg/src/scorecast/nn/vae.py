"""Variational autoencoder for latent feature extraction.

The encoder maps standardized assessment features to a diagonal Gaussian
(mu, log_sigma); the decoder reconstructs the features from a sample
z = mu + sigma * eps drawn with the reparameterization trick.  Training
minimizes

    loss = reconstruction_mse + kl_weight * kl

where reconstruction_mse is the mean squared error over every matrix
entry and kl is the per-sample KL divergence against the standard normal
prior, averaged over the batch:

    KL(N(mu, sigma^2) || N(0, 1)) = 1/2 * sum_d (sigma^2 + mu^2 - 1 - 2 log sigma)

Downstream regressors consume the posterior mean by default.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalError, TrainingDivergedError, UsageError
from .core import (
    DenseNet,
    TrainConfig,
    ensure_finite,
    make_optimizer,
    minibatches,
)

DEFAULT_LATENT_DIM = 2
DEFAULT_HIDDEN_SIZE = 16
DEFAULT_KL_WEIGHT = 1.0


def kl_divergence_general(mu_p, sigma_p, mu_q, sigma_q) -> float:
    """KL(N(mu_p, sigma_p^2) || N(mu_q, sigma_q^2)) for diagonal Gaussians.

    Per coordinate log(sigma_q/sigma_p) + (sigma_p^2 + (mu_p - mu_q)^2)
    / (2 sigma_q^2) - 1/2, summed over coordinates.
    """
    mu_p = np.asarray(mu_p, dtype=np.float64).reshape(-1)
    mu_q = np.asarray(mu_q, dtype=np.float64).reshape(-1)
    sigma_p = np.asarray(sigma_p, dtype=np.float64).reshape(-1)
    sigma_q = np.asarray(sigma_q, dtype=np.float64).reshape(-1)
    if not (mu_p.shape == mu_q.shape == sigma_p.shape == sigma_q.shape):
        raise UsageError("kl_divergence_general needs matching coordinate counts")
    if np.any(sigma_p <= 0.0) or np.any(sigma_q <= 0.0):
        raise NumericalError("kl_divergence_general requires positive sigmas")
    terms = (np.log(sigma_q / sigma_p)
             + (sigma_p ** 2 + (mu_p - mu_q) ** 2) / (2.0 * sigma_q ** 2)
             - 0.5)
    return float(np.sum(terms))


def kl_divergence_standard(mu: np.ndarray, log_sigma: np.ndarray):
    """KL against N(0, I) plus gradients, parameterized by log sigma.

    Returns (value, d/dmu, d/dlog_sigma); value sums over coordinates.
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    if mu.shape != log_sigma.shape:
        raise UsageError("mu and log_sigma shapes differ")
    var = np.exp(2.0 * log_sigma)
    value = 0.5 * float(np.sum(var + mu * mu - 1.0 - 2.0 * log_sigma))
    return value, mu.copy(), var - 1.0


class VaeModel:
    """Encoder/decoder pair with a diagonal Gaussian latent."""

    def __init__(self, encoder: DenseNet, decoder: DenseNet,
                 latent_dim: int, kl_weight: float = DEFAULT_KL_WEIGHT):
        if encoder.layer_sizes[-1] != 2 * latent_dim:
            raise UsageError(
                f"encoder must emit 2*latent_dim values, got {encoder.layer_sizes[-1]} "
                f"for latent_dim {latent_dim}"
            )
        if decoder.layer_sizes[0] != latent_dim:
            raise UsageError("decoder input width must equal latent_dim")
        self.encoder = encoder
        self.decoder = decoder
        self.latent_dim = latent_dim
        self.kl_weight = kl_weight

    @classmethod
    def init(cls, input_dim: int, latent_dim: int, rng: np.random.Generator,
             hidden_size: int = DEFAULT_HIDDEN_SIZE,
             kl_weight: float = DEFAULT_KL_WEIGHT) -> "VaeModel":
        encoder = DenseNet.init([input_dim, hidden_size, 2 * latent_dim],
                                ["tanh", "identity"], rng)
        decoder = DenseNet.init([latent_dim, hidden_size, input_dim],
                                ["tanh", "identity"], rng)
        return cls(encoder, decoder, latent_dim, kl_weight)

    @property
    def input_dim(self) -> int:
        return self.encoder.layer_sizes[0]

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.decoder.params()

    def encode(self, x: np.ndarray):
        """Posterior parameters (mu, log_sigma) for a batch, each (n, latent)."""
        out, _ = self.encoder.forward(x)
        return out[:, :self.latent_dim], out[:, self.latent_dim:]

    def loss_and_grads(self, x: np.ndarray, eps: np.ndarray):
        """Loss and hand-derived parameter gradients for a fixed noise draw.

        eps must have shape (n, latent_dim).  Exposing the draw keeps the
        loss deterministic so finite differences can validate the grads.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        eps = np.asarray(eps, dtype=np.float64)
        n, d = x.shape
        if eps.shape != (n, self.latent_dim):
            raise UsageError(f"eps must have shape {(n, self.latent_dim)}, got {eps.shape}")

        enc_out, enc_cache = self.encoder.forward(x)
        mu = enc_out[:, :self.latent_dim]
        log_sigma = enc_out[:, self.latent_dim:]
        sigma = np.exp(log_sigma)
        z = mu + sigma * eps
        recon, dec_cache = self.decoder.forward(z)

        diff = recon - x
        recon_loss = float(np.sum(diff * diff) / diff.size)
        kl_value, dmu_kl, dls_kl = kl_divergence_standard(mu, log_sigma)
        loss = recon_loss + self.kl_weight * (kl_value / n)

        dec_grads, dz = self.decoder.backward(dec_cache, 2.0 * diff / diff.size)
        dmu = dz + self.kl_weight * dmu_kl / n
        dlog_sigma = dz * eps * sigma + self.kl_weight * dls_kl / n
        enc_grads, _ = self.encoder.backward(
            enc_cache, np.concatenate([dmu, dlog_sigma], axis=1))
        return loss, enc_grads + dec_grads, (recon_loss, kl_value / n)


def vae_train(x: np.ndarray, input_dim: int | None = None,
              latent_dim: int = DEFAULT_LATENT_DIM,
              hidden_size: int = DEFAULT_HIDDEN_SIZE,
              kl_weight: float = DEFAULT_KL_WEIGHT,
              config: TrainConfig | None = None,
              model: VaeModel | None = None) -> tuple[VaeModel, list[float]]:
    """Train a VAE on standardized rows x; returns (model, epoch loss trace).

    Callers standardize x beforehand with training-fold statistics.  A
    pre-built model may be passed to continue training or to pin weights.
    """
    config = config or TrainConfig()
    config.validate()
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise UsageError("cannot train a VAE on an empty matrix")
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = VaeModel.init(input_dim or x.shape[1], latent_dim, rng,
                              hidden_size=hidden_size, kl_weight=kl_weight)
    if model.input_dim != x.shape[1]:
        raise UsageError(f"model expects {model.input_dim} features, x has {x.shape[1]}")

    opt = make_optimizer(config)
    params = model.params()
    trace: list[float] = []
    for _ in range(config.epochs):
        epoch_loss = 0.0
        n_batches = 0
        for idx in minibatches(x.shape[0], config.batch_size, rng):
            eps = rng.standard_normal((len(idx), model.latent_dim))
            loss, grads, _ = model.loss_and_grads(x[idx], eps)
            if not np.isfinite(loss):
                raise TrainingDivergedError("vae training loss became non-finite")
            for g in grads:
                ensure_finite(g, "vae gradients")
            opt.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / max(n_batches, 1))
    return model, trace


def extract_latent(model: VaeModel, x: np.ndarray, mode: str = "mean",
                   seed: int = 0) -> np.ndarray:
    """Latent features for rows x: the posterior mean, or one seeded sample."""
    mu, log_sigma = model.encode(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if mode == "mean":
        return mu
    if mode == "sample":
        rng = np.random.default_rng(seed)
        return mu + np.exp(log_sigma) * rng.standard_normal(mu.shape)
    raise UsageError(f"unknown latent extraction mode {mode!r}")
