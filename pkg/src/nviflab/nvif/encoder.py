"""The communication encoder/decoder pair.

Per timestep the encoder runs two independent FlowNets (one over the agents'
compressed observations, one over their hidden states), feeds the results
through a shared GRU cell (observation path as input, hidden path as the
recurrent state), and reads the latent distribution off an affine head. The
decoder reconstructs an agent's raw observation window from its sampled
latent concatenated with its normalized position.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..commgraph import NeighborGraph, normalize
from ..diffcore import (
    LOG_SIGMA_MAX,
    LOG_SIGMA_MIN,
    ParamStore,
    Tensor,
    affine,
    clamp,
    concat,
    gather_rows,
    gaussian_sample,
    gru_cell,
    init_gru,
    init_linear,
    relu,
    sigmoid,
)
from ..errors import ProtocolError
from .flownet import FlowNetParams, flownet_forward, init_flownet


@dataclass
class NvifConfig:
    obs_feat_width: int          # compressed observation width fed to FlowNet_o
    obs_dim: int                 # raw observation width the decoder reconstructs
    hidden_width: int = 64
    latent_width: int = 32
    flow_layers: int = 2
    decoder_hidden: int = 128
    dtype: str = "float32"

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass
class EncoderState:
    ids: tuple[int, ...]
    hidden: Tensor  # (len(ids), hidden_width)


@dataclass
class LatentDistribution:
    mu: Tensor
    log_sigma: Tensor
    latent: Tensor


class NvifEncoder:
    def __init__(self, config: NvifConfig, rng: np.random.Generator, store: ParamStore | None = None):
        self.config = config
        dt = config.np_dtype
        self.store = store if store is not None else ParamStore()
        if store is None:
            c = config
            self.flow_o = init_flownet(
                self.store, "flow_o",
                [c.obs_feat_width] + [c.hidden_width] * c.flow_layers, rng, dt)
            self.flow_h = init_flownet(
                self.store, "flow_h", [c.hidden_width] * (c.flow_layers + 1), rng, dt)
            for name, arr in init_gru(rng, c.hidden_width, c.hidden_width, dt).items():
                self.store.add(f"gru/{name}", arr)
            for head in ("mu", "ls"):
                w, b = init_linear(rng, c.hidden_width, c.latent_width, dt,
                                   scale=np.sqrt(1.0 / c.hidden_width))
                self.store.add(f"head/{head}_w", w)
                self.store.add(f"head/{head}_b", b)
            w, b = init_linear(rng, c.latent_width + 2, c.decoder_hidden, dt)
            self.store.add("dec/w1", w)
            self.store.add("dec/b1", b)
            w, b = init_linear(rng, c.decoder_hidden, c.obs_dim, dt,
                               scale=np.sqrt(1.0 / c.decoder_hidden))
            self.store.add("dec/w2", w)
            self.store.add("dec/b2", b)
        else:
            layers = config.flow_layers
            self.flow_o = FlowNetParams([self.store[f"flow_o/w{i}"] for i in range(layers)])
            self.flow_h = FlowNetParams([self.store[f"flow_h/w{i}"] for i in range(layers)])
        self._gru = {k.split("/", 1)[1]: v for k, v in
                     ((n, self.store[n]) for n in self.store.names() if n.startswith("gru/"))}

    # -- state handling -----------------------------------------------------

    def init_state(self, ids) -> EncoderState:
        ids = tuple(ids)
        zeros = np.zeros((len(ids), self.config.hidden_width), dtype=self.config.np_dtype)
        return EncoderState(ids=ids, hidden=Tensor(zeros))

    def _hidden_for(self, state: EncoderState, ids: tuple[int, ...]) -> Tensor:
        """Rows of the previous hidden state for ``ids``; unseen ids get zeros."""
        if ids == state.ids:
            return state.hidden
        lookup = {agent: row for row, agent in enumerate(state.ids)}
        if all(agent in lookup for agent in ids):
            return gather_rows(state.hidden, [lookup[a] for a in ids])
        zero_row = Tensor(np.zeros((1, self.config.hidden_width), dtype=self.config.np_dtype))
        extended = concat([state.hidden, zero_row], axis=0)
        n_prev = len(state.ids)
        return gather_rows(extended, [lookup.get(a, n_prev) for a in ids])

    # -- forward passes -------------------------------------------------------

    def step(self, obs_feats, state: EncoderState, graph: NeighborGraph,
             rng: np.random.Generator | None = None, eps: np.ndarray | None = None,
             sample: bool = True, adj: np.ndarray | None = None):
        """One encoder timestep over the alive agents in ``graph``.

        Returns (next state, latent distribution). Agents absent from the
        graph are dropped from the state; new ones start from a zero hidden
        vector.
        """
        ids = graph.ids
        feats = obs_feats if isinstance(obs_feats, Tensor) else Tensor(obs_feats)
        if feats.data.shape[0] != len(ids):
            raise ProtocolError(
                f"encoder step: {feats.data.shape[0]} feature rows for {len(ids)} agents")
        if adj is None:
            adj = normalize(graph).astype(self.config.np_dtype)
        hidden = self._hidden_for(state, ids)
        phi = flownet_forward(feats, adj, self.flow_o)
        psi = flownet_forward(hidden, adj, self.flow_h)
        h_next = gru_cell(phi, psi, self._gru)
        mu = affine(h_next, self.store["head/mu_w"], self.store["head/mu_b"])
        log_sigma = clamp(affine(h_next, self.store["head/ls_w"], self.store["head/ls_b"]),
                          LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        if sample:
            latent = gaussian_sample(mu, log_sigma, rng=rng, eps=eps)
        else:
            latent = mu
        return EncoderState(ids=ids, hidden=h_next), LatentDistribution(mu, log_sigma, latent)

    def decode(self, latents, positions) -> Tensor:
        """Reconstruct flattened observation windows from latents and
        normalized positions; sigmoid keeps every cell in (0, 1)."""
        lat = latents if isinstance(latents, Tensor) else Tensor(latents)
        pos = positions if isinstance(positions, Tensor) else Tensor(
            np.asarray(positions, dtype=self.config.np_dtype))
        x = concat([lat, pos], axis=1)
        h = relu(affine(x, self.store["dec/w1"], self.store["dec/b1"]))
        return sigmoid(affine(h, self.store["dec/w2"], self.store["dec/b2"]))

    # -- persistence ----------------------------------------------------------

    def save(self, prefix):
        prefix = Path(prefix)
        self.store.save(prefix)
        with open(prefix.parent / (prefix.name + "_meta.json"), "w") as fh:
            json.dump(asdict(self.config), fh, indent=1)

    @classmethod
    def load(cls, prefix) -> "NvifEncoder":
        prefix = Path(prefix)
        with open(prefix.parent / (prefix.name + "_meta.json")) as fh:
            config = NvifConfig(**json.load(fh))
        store = ParamStore.load(prefix)
        return cls(config, rng=np.random.default_rng(0), store=store)
