"""Latent feature providers: what gets concatenated to the local observation.

The trainers are identical across algorithms; only the provider changes.
"""
from __future__ import annotations

import numpy as np

from ..commgraph import build_graph, fully_connected
from ..diffcore import no_grad
from ..nvif import NvifEncoder


class EmptyLatents:
    """Independent learner: no auxiliary feature at all."""

    width = 0

    def reset(self):
        pass

    def step(self, feats, positions_int, ids) -> np.ndarray:
        return np.zeros((len(ids), 0), dtype=feats.dtype)


class MeanObsLatents:
    """Mean of all alive agents' compressed observations, tiled per agent."""

    def __init__(self, feat_width: int):
        self.width = feat_width

    def reset(self):
        pass

    def step(self, feats, positions_int, ids) -> np.ndarray:
        mean = feats.mean(axis=0)
        return np.tile(mean, (len(ids), 1))


class NvifLatents:
    """Latent states from a frozen encoder run over the live graph."""

    def __init__(self, encoder: NvifEncoder, rng: np.random.Generator,
                 full_graph: bool = False, sample: bool = True):
        self.encoder = encoder
        self.rng = rng
        self.full_graph = full_graph
        self.sample = sample
        self.width = encoder.config.latent_width
        self._state = None

    def reset(self):
        self._state = None

    def step(self, feats, positions_int, ids) -> np.ndarray:
        graph = fully_connected(ids) if self.full_graph else build_graph(positions_int, ids)
        if self._state is None:
            self._state = self.encoder.init_state(ids)
        with no_grad():
            self._state, dist = self.encoder.step(
                feats, self._state, graph, rng=self.rng, sample=self.sample)
        return dist.latent.data


def make_provider(mode: str, feat_width: int, encoder=None, rng=None, sample=True):
    if mode == "none":
        return EmptyLatents()
    if mode == "mean":
        return MeanObsLatents(feat_width)
    if mode in ("nvif", "full"):
        if encoder is None:
            raise ValueError(f"latent mode {mode!r} needs a pre-trained encoder")
        return NvifLatents(encoder, rng=rng, full_graph=(mode == "full"), sample=sample)
    raise ValueError(f"unknown latent mode {mode!r}")


LATENT_MODES = ("nvif", "none", "mean", "full")
