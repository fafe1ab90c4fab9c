"""Advantage and return computations for one agent's reward stream."""
from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimate.

    ``values`` must hold one more entry than ``rewards`` (the bootstrap value
    of the state after the last step; zero when the episode terminated).
    A_t = sum_{l>=0} (gamma*lam)^l * delta_{t+l},
    delta_t = r_{t+1} + gamma*V_{t+1} - V_t.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(
            f"compute_gae: need len(values) == len(rewards)+1, got "
            f"{values.shape[0]} and {rewards.shape[0]}")
    deltas = rewards + gamma * values[1:] - values[:-1]
    adv = np.empty_like(deltas)
    acc = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Discounted reward-to-go: xi_t = r_{t+1} + gamma * xi_{t+1}."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out
