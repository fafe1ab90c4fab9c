"""Observation compressor: a small VAE trained on raw local views.

The rest of the pipeline consumes its posterior mean as a fixed-width
1-D feature, deterministically at inference time. Training balances the
reconstruction term against the KL by summing the cross entropy over cells
(the usual VAE convention), otherwise the prior collapses the code.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..diffcore import (
    ParamStore,
    Tensor,
    affine,
    backward,
    bce_loss,
    clamp,
    gaussian_sample,
    init_linear,
    mul,
    no_grad,
    optimizer_step,
    relu,
    sigmoid,
)
from ..errors import DataError, StateError
from .losses import kl_standard_normal


@dataclass
class ObsVaeConfig:
    obs_dim: int
    latent_width: int = 16
    hidden_width: int = 64
    dtype: str = "float32"


@dataclass
class ObsVaeHyper:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 256
    seed: int = 0


class ObsCompressor:
    def __init__(self, config: ObsVaeConfig, rng: np.random.Generator,
                 store: ParamStore | None = None, trained: bool = False):
        self.config = config
        self.trained = trained
        dt = np.dtype(config.dtype)
        if store is not None:
            self.store = store
            return
        self.store = ParamStore()
        c = config
        for name, fin, fout, scale in (
            ("enc_w1", c.obs_dim, c.hidden_width, None),
            ("enc_mu", c.hidden_width, c.latent_width, np.sqrt(1.0 / c.hidden_width)),
            ("enc_ls", c.hidden_width, c.latent_width, np.sqrt(1.0 / c.hidden_width)),
            ("dec_w1", c.latent_width, c.hidden_width, None),
            ("dec_w2", c.hidden_width, c.obs_dim, np.sqrt(1.0 / c.hidden_width)),
        ):
            w, b = init_linear(rng, fin, fout, dt, scale=scale)
            self.store.add(name, w)
            self.store.add(name + "_b", b)

    def _encode(self, x):
        h = relu(affine(x, self.store["enc_w1"], self.store["enc_w1_b"]))
        mu = affine(h, self.store["enc_mu"], self.store["enc_mu_b"])
        log_sigma = clamp(affine(h, self.store["enc_ls"], self.store["enc_ls_b"]), -10.0, 4.0)
        return mu, log_sigma

    def _decode(self, z):
        h = relu(affine(z, self.store["dec_w1"], self.store["dec_w1_b"]))
        return sigmoid(affine(h, self.store["dec_w2"], self.store["dec_w2_b"]))

    def encode(self, obs_flat: np.ndarray) -> np.ndarray:
        """Posterior means for a batch of flattened observations."""
        if not self.trained:
            raise StateError("observation compressor used before training")
        x = np.atleast_2d(np.asarray(obs_flat, dtype=self.config.dtype))
        with no_grad():
            mu, _ = self._encode(Tensor(x))
        return mu.data

    def reconstruction_bce(self, obs_flat: np.ndarray) -> float:
        """Per-cell mean cross entropy of deterministic reconstructions."""
        x = np.atleast_2d(np.asarray(obs_flat, dtype=self.config.dtype))
        with no_grad():
            mu, _ = self._encode(Tensor(x))
            loss = bce_loss(x, self._decode(mu))
        return float(loss.data)

    def train(self, corpus: np.ndarray, hyper: ObsVaeHyper) -> list[dict]:
        """Minimize summed-bce reconstruction + KL over shuffled minibatches."""
        corpus = np.asarray(corpus, dtype=self.config.dtype)
        if corpus.ndim != 2 or corpus.shape[0] == 0:
            raise DataError(f"obs-vae corpus must be (n, obs_dim), got {corpus.shape}")
        rng = np.random.default_rng(hyper.seed)
        history = []
        for epoch in range(hyper.epochs):
            order = rng.permutation(corpus.shape[0])
            epoch_recon = epoch_kl = 0.0
            n_batches = 0
            for lo in range(0, len(order), hyper.batch_size):
                batch = corpus[order[lo:lo + hyper.batch_size]]
                x = Tensor(batch)
                mu, log_sigma = self._encode(x)
                z = gaussian_sample(mu, log_sigma, rng=rng)
                recon = mul(bce_loss(batch, self._decode(z)), float(self.config.obs_dim))
                kl = kl_standard_normal(mu, log_sigma)
                loss = recon + kl
                self.store.zero_grad()
                backward(loss)
                optimizer_step(self.store, lr=hyper.lr)
                epoch_recon += float(recon.data)
                epoch_kl += float(kl.data)
                n_batches += 1
            history.append({"epoch": epoch, "recon": epoch_recon / n_batches,
                            "kl": epoch_kl / n_batches})
        self.trained = True
        return history

    def save(self, prefix):
        prefix = Path(prefix)
        self.store.save(prefix)
        meta = asdict(self.config) | {"trained": self.trained}
        with open(prefix.parent / (prefix.name + "_meta.json"), "w") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def load(cls, prefix) -> "ObsCompressor":
        prefix = Path(prefix)
        with open(prefix.parent / (prefix.name + "_meta.json")) as fh:
            meta = json.load(fh)
        trained = meta.pop("trained")
        return cls(ObsVaeConfig(**meta), rng=np.random.default_rng(0),
                   store=ParamStore.load(prefix), trained=trained)


def compress_observation(compressor: ObsCompressor, obs) -> np.ndarray:
    """1-D feature for a single observation (its posterior mean)."""
    flat = obs.flat() if hasattr(obs, "flat") and callable(obs.flat) else np.asarray(obs)
    return compressor.encode(flat.reshape(1, -1))[0]
