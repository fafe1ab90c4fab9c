"""High-level experiment steps shared by the CLI and the test suite."""
from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..env_gather import N_ACTIONS, new_world, observe, step
from ..nvif import (
    NvifConfig,
    NvifEncoder,
    ObsCompressor,
    ObsVaeConfig,
    collect_pretrain_buffer,
    pretrain,
)
from ..policy import train_dqn, train_ppo
from .bundle import PolicyBundle
from .config import ALGORITHMS, ExperimentConfig


def collect_obs_corpus(task_cfg, episodes: int, rng: np.random.Generator,
                       max_samples: int | None = None) -> np.ndarray:
    """Raw flattened observations from random-policy play."""
    rows = []
    count = 0
    for _ in range(episodes):
        world = new_world(replace(task_cfg, seed=int(rng.integers(2 ** 62))))
        while not world.done:
            ids = world.alive_agents()
            for i in ids:
                rows.append(observe(world, i).flat())
            count += len(ids)
            actions = {i: int(a) for i, a in zip(ids, rng.integers(0, N_ACTIONS, len(ids)))}
            step(world, actions)
            if max_samples is not None and count >= max_samples:
                return np.stack(rows[:max_samples])
    return np.stack(rows)


def obs_vae_path(cfg: ExperimentConfig) -> Path:
    if cfg.obs_vae_checkpoint:
        return Path(cfg.obs_vae_checkpoint)
    return cfg.out_path / "obs_vae" / "ckpt"


def encoder_path(cfg: ExperimentConfig) -> Path:
    if cfg.encoder_checkpoint:
        return Path(cfg.encoder_checkpoint)
    return cfg.out_path / "encoder" / "ckpt"


def run_pretrain_obs(cfg: ExperimentConfig) -> ObsCompressor:
    task_cfg = cfg.task_config()
    section = cfg.obs_vae
    rng = np.random.default_rng(section.get("seed", 0))
    corpus = collect_obs_corpus(
        task_cfg,
        episodes=section.get("corpus_episodes", 60),
        rng=rng,
        max_samples=section.get("corpus_max_samples", 30_000),
    )
    vae_cfg = ObsVaeConfig(
        obs_dim=task_cfg.obs_dim,
        latent_width=section.get("latent_width", 16),
        hidden_width=section.get("hidden_width", 64),
    )
    compressor = ObsCompressor(vae_cfg, rng)
    compressor.train(corpus, cfg.obs_vae_hyper())
    path = obs_vae_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    compressor.save(path)
    return compressor


def load_compressor(cfg: ExperimentConfig) -> ObsCompressor:
    path = obs_vae_path(cfg)
    if not path.with_suffix(".json").exists():
        raise FileNotFoundError(f"observation compressor checkpoint missing: {path}")
    return ObsCompressor.load(path)


def run_pretrain_nvif(cfg: ExperimentConfig, compressor: ObsCompressor | None = None):
    if compressor is None:
        compressor = load_compressor(cfg)
    task_cfg = cfg.task_config()
    section = cfg.nvif
    hyper = cfg.nvif_hyper()
    rng = np.random.default_rng(hyper.seed)
    buffer = collect_pretrain_buffer(
        task_cfg, section.get("buffer_episodes", 200), compressor, rng,
        graph_kind=section.get("graph", "neighbor"))
    enc_cfg = NvifConfig(
        obs_feat_width=compressor.config.latent_width,
        obs_dim=task_cfg.obs_dim,
        hidden_width=section.get("hidden_width", 64),
        latent_width=section.get("latent_width", 32),
        flow_layers=section.get("flow_layers", 2),
        decoder_hidden=section.get("decoder_hidden", 128),
    )
    encoder = NvifEncoder(enc_cfg, rng)
    encoder, history = pretrain(buffer, hyper, encoder)
    path = encoder_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    encoder.save(path)
    with open(path.parent / "pretrain_history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "recon", "kl", "consistency", "total"])
        for i, rep in enumerate(history):
            writer.writerow([i, rep.recon, rep.kl, rep.consistency, rep.total])
    return encoder, history


def load_encoder(cfg: ExperimentConfig) -> NvifEncoder:
    path = encoder_path(cfg)
    if not path.with_suffix(".json").exists():
        raise FileNotFoundError(f"encoder checkpoint missing: {path}")
    return NvifEncoder.load(path)


def train_run_dir(cfg: ExperimentConfig, seed: int) -> Path:
    return cfg.out_path / f"train-{cfg.algorithm}-seed{seed}"


def run_training(cfg: ExperimentConfig, seed: int, resume: bool = False,
                 compressor: ObsCompressor | None = None,
                 encoder: NvifEncoder | None = None) -> Path:
    """Train one seed, write metrics + a self-contained bundle; returns run dir."""
    family, latent_mode = ALGORITHMS[cfg.algorithm]
    if compressor is None:
        compressor = load_compressor(cfg)
    if encoder is None and latent_mode in ("nvif", "full"):
        encoder = load_encoder(cfg)
    task_cfg = cfg.task_config()
    run_dir = train_run_dir(cfg, seed)
    run_dir.mkdir(parents=True, exist_ok=True)
    if family == "ppo":
        result = train_ppo(task_cfg, compressor, cfg.ppo_hyper(seed),
                           latent_mode=latent_mode, encoder=encoder,
                           out_dir=run_dir, resume=resume)
        bundle = PolicyBundle(cfg.algorithm, latent_mode, cfg.task, compressor,
                              encoder=encoder, actor_critic=result.actor_critic)
    else:
        result = train_dqn(task_cfg, compressor, cfg.dqn_hyper(seed),
                           latent_mode=latent_mode, encoder=encoder, out_dir=run_dir)
        bundle = PolicyBundle(cfg.algorithm, latent_mode, cfg.task, compressor,
                              encoder=encoder, qnet=result.qnet)
    bundle.save(run_dir / "bundle")
    return run_dir
