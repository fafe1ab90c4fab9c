"""Two-layer actor and critic shared by all agents."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..diffcore import (
    ParamStore,
    Tensor,
    affine,
    init_linear,
    log_softmax,
    no_grad,
    relu,
)
from ..env_gather import N_ACTIONS


@dataclass
class PolicyConfig:
    input_width: int
    hidden_width: int = 64
    n_actions: int = N_ACTIONS
    dtype: str = "float32"


class ActorCritic:
    """Softmax policy over the action set plus a scalar state-value head.

    Inputs are [compressed observation || latent feature] rows; every agent
    runs the same parameters.
    """

    def __init__(self, config: PolicyConfig, rng: np.random.Generator,
                 actor_store: ParamStore | None = None,
                 critic_store: ParamStore | None = None):
        self.config = config
        dt = np.dtype(config.dtype)
        if actor_store is not None:
            self.actor = actor_store
            self.critic = critic_store
            return
        self.actor = ParamStore()
        self.critic = ParamStore()
        w, b = init_linear(rng, config.input_width, config.hidden_width, dt)
        self.actor.add("w1", w)
        self.actor.add("b1", b)
        # near-uniform initial policy: small output weights
        w, b = init_linear(rng, config.hidden_width, config.n_actions, dt, scale=0.01)
        self.actor.add("w2", w)
        self.actor.add("b2", b)
        w, b = init_linear(rng, config.input_width, config.hidden_width, dt)
        self.critic.add("w1", w)
        self.critic.add("b1", b)
        w, b = init_linear(rng, config.hidden_width, 1, dt, scale=0.01)
        self.critic.add("w2", w)
        self.critic.add("b2", b)

    def logits(self, x) -> Tensor:
        h = relu(affine(x, self.actor["w1"], self.actor["b1"]))
        return affine(h, self.actor["w2"], self.actor["b2"])

    def log_probs(self, x) -> Tensor:
        return log_softmax(self.logits(x))

    def value(self, x) -> Tensor:
        h = relu(affine(x, self.critic["w1"], self.critic["b1"]))
        return affine(h, self.critic["w2"], self.critic["b2"])

    def act(self, feats: np.ndarray, rng: np.random.Generator):
        """Sample one action per row; returns (actions, their probabilities)."""
        with no_grad():
            logp = self.log_probs(Tensor(feats)).data
        probs = np.exp(logp.astype(np.float64))
        probs /= probs.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(probs)):
            raise FloatingPointError("act: non-finite action probabilities")
        u = rng.random(probs.shape[0])
        cum = np.cumsum(probs, axis=1)
        actions = (cum < u[:, None]).sum(axis=1)
        actions = np.minimum(actions, probs.shape[1] - 1)
        return actions.astype(np.int64), probs[np.arange(len(actions)), actions]

    def values(self, feats: np.ndarray) -> np.ndarray:
        with no_grad():
            v = self.value(Tensor(feats)).data
        return v[:, 0].astype(np.float64)

    def greedy(self, feats: np.ndarray) -> np.ndarray:
        with no_grad():
            logits = self.logits(Tensor(feats)).data
        return logits.argmax(axis=1).astype(np.int64)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.actor.save(directory / "actor")
        self.critic.save(directory / "critic")
        with open(directory / "policy_meta.json", "w") as fh:
            json.dump(asdict(self.config), fh, indent=1)

    @classmethod
    def load(cls, directory) -> "ActorCritic":
        directory = Path(directory)
        with open(directory / "policy_meta.json") as fh:
            config = PolicyConfig(**json.load(fh))
        return cls(config, rng=np.random.default_rng(0),
                   actor_store=ParamStore.load(directory / "actor"),
                   critic_store=ParamStore.load(directory / "critic"))
