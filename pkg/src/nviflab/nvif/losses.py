"""Reconstruction, divergence, and latent-consistency losses."""
from __future__ import annotations

from dataclasses import dataclass

from ..diffcore import Tensor, bce_loss, exp, mean, mul, sub, sum as tsum
from ..errors import DataError


@dataclass
class NvifLossReport:
    recon: float
    kl: float
    consistency: float
    total: float
    alpha: float


def kl_standard_normal(mu, log_sigma) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over latent dims, averaged over
    agents: 0.5 * sum_d(mu^2 + sigma^2 - 1 - 2 log sigma)."""
    per_dim = mul(mu, mu) + exp(mul(log_sigma, 2.0)) - 1.0 - mul(log_sigma, 2.0)
    return mul(mean(tsum(per_dim, axis=1)), 0.5)


def loss_variational(decoder, obs, positions, latents, mu, log_sigma):
    """Per-agent average of (reconstruction bce, closed-form KL).

    ``decoder`` is called as decoder(latents, positions) and must return
    per-cell probabilities for the flattened observation windows.
    """
    n = latents.data.shape[0] if isinstance(latents, Tensor) else len(latents)
    if n == 0:
        raise DataError("loss_variational: empty batch")
    recon = bce_loss(obs, decoder(latents, positions))
    kl = kl_standard_normal(mu, log_sigma)
    return recon, kl


def loss_consistency(latents) -> Tensor:
    """Mean squared deviation of each agent's latent from the shared mean,
    summed over latent dims: (1/n) sum_i ||s_i - mean_j s_j||^2."""
    lat = latents if isinstance(latents, Tensor) else Tensor(latents)
    n = lat.data.shape[0]
    dev = sub(lat, mean(lat, axis=0))
    return mul(tsum(mul(dev, dev)), 1.0 / n)
