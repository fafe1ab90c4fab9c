"""Cross-task scalability matrix: policies (rows) evaluated on tasks (cols),
returns normalized by each column's maximum."""
from __future__ import annotations

import csv

import numpy as np

from ..errors import DataError
from .evaluate import evaluate


def normalize_matrix(raw: np.ndarray) -> np.ndarray:
    """Column-normalized scores in [0, 1]; negative returns clamp to zero.

    Every column's maximum must be positive (some policy has to actually
    score on each task, as in the source protocol), and maps to exactly 1.0.
    """
    raw = np.asarray(raw, dtype=np.float64)
    col_max = raw.max(axis=0)
    if np.any(col_max <= 0):
        bad = np.flatnonzero(col_max <= 0).tolist()
        raise DataError(f"scalability: no positive return in task columns {bad}")
    return np.clip(raw, 0.0, None) / col_max


def scalability_matrix(policies, tasks, episodes: int, seed: int):
    """``policies``: [(name, bundle_or_path)], ``tasks``: [(name, TaskConfig)].

    Returns (row_names, col_names, raw_returns, scores).
    """
    raw = np.zeros((len(policies), len(tasks)))
    for i, (_, policy) in enumerate(policies):
        for j, (_, task_cfg) in enumerate(tasks):
            raw[i, j] = evaluate(policy, task_cfg, episodes, seed)["mean_return"]
    return ([n for n, _ in policies], [n for n, _ in tasks],
            raw, normalize_matrix(raw))


def write_matrix_csv(path, row_names, col_names, matrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy\\task"] + list(col_names))
        for name, row in zip(row_names, np.asarray(matrix)):
            writer.writerow([name] + [f"{v:.6f}" for v in row])
