"""Experiment orchestration: configs, pipelines, evaluation, CLI."""
from .bundle import PolicyBundle
from .config import ALGORITHMS, ExperimentConfig, load_experiment
from .evaluate import BundlePolicy, NoopPolicy, RandomPolicy, evaluate, make_policy
from .pipeline import (
    collect_obs_corpus,
    encoder_path,
    load_compressor,
    load_encoder,
    obs_vae_path,
    run_pretrain_nvif,
    run_pretrain_obs,
    run_training,
    train_run_dir,
)
from .scalability import normalize_matrix, scalability_matrix, write_matrix_csv

__all__ = [
    "ALGORITHMS", "BundlePolicy", "ExperimentConfig", "NoopPolicy",
    "PolicyBundle", "RandomPolicy", "collect_obs_corpus", "encoder_path",
    "evaluate", "load_compressor", "load_encoder", "load_experiment",
    "make_policy", "normalize_matrix", "obs_vae_path", "run_pretrain_nvif",
    "run_pretrain_obs", "run_training", "scalability_matrix",
    "train_run_dir", "write_matrix_csv",
]
