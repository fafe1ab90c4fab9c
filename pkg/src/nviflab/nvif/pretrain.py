"""Protocol pre-training on random-policy episodes.

Episodes are replayed in batches, time-major: at each timestep the alive
agents of every episode in the batch are stacked into one feature matrix and
mixed through a block-diagonal normalized adjacency, so no information leaks
between episodes while the matmuls stay large. The loss averages the
per-timestep reconstruction, divergence, and consistency terms over agents
and episode-timesteps, and one optimizer step is taken per episode batch.
Gradients flow through the full hidden-state chain of each episode.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..commgraph import build_graph, fully_connected, normalize
from ..diffcore import (
    Tensor,
    affine,
    backward,
    bce_loss,
    clamp,
    exp,
    gather_rows,
    gaussian_sample,
    gru_cell,
    mul,
    no_grad,
    optimizer_step,
    sparse_matmul,
    sub,
    sum as tsum,
)
from ..env_gather import N_ACTIONS, new_world, observe, step
from ..errors import DataError
from .encoder import NvifEncoder
from .flownet import flownet_forward
from .losses import NvifLossReport
from .obs_vae import ObsCompressor


@dataclass
class StepData:
    ids: tuple[int, ...]
    raw_obs: np.ndarray        # (n, obs_dim)
    feats: np.ndarray          # (n, obs_feat_width)
    positions: np.ndarray      # (n, 2) normalized
    adj_norm: np.ndarray       # (n, n)


@dataclass
class EpisodeRecord:
    steps: list[StepData]


@dataclass
class PretrainHyper:
    alpha: float = 0.1
    epochs: int = 200
    lr: float = 3e-3
    batch_episodes: int = 16
    recon_weight: float = 1.0
    seed: int = 0
    stop_recon_frac: float | None = None  # stop once recon <= frac * epoch-1 recon
                                          # and the consistency term sits below epoch 1


def gather_step_data(world, ids, compressor: ObsCompressor, graph_kind: str = "neighbor",
                     dtype=np.float32) -> StepData:
    """Observations, compressed features, positions, and adjacency for one step."""
    obs = [observe(world, i) for i in ids]
    raw = np.stack([o.flat() for o in obs]).astype(dtype)
    feats = compressor.encode(raw).astype(dtype)
    pos = np.asarray([o.position for o in obs], dtype=dtype)
    if graph_kind == "full":
        graph = fully_connected(ids)
    else:
        graph = build_graph(world.agent_positions(ids), ids)
    return StepData(ids=tuple(ids), raw_obs=raw, feats=feats, positions=pos,
                    adj_norm=normalize(graph).astype(dtype))


def collect_pretrain_buffer(task_config, n_episodes: int, compressor: ObsCompressor,
                            rng: np.random.Generator, graph_kind: str = "neighbor"
                            ) -> list[EpisodeRecord]:
    """Random-policy episodes recorded as (observations, positions, graphs)."""
    buffer = []
    for _ in range(n_episodes):
        world = new_world(replace(task_config, seed=int(rng.integers(2 ** 62))))
        steps = []
        while not world.done:
            ids = world.alive_agents()
            if not ids:
                break
            steps.append(gather_step_data(world, ids, compressor, graph_kind))
            actions = {i: int(a) for i, a in zip(ids, rng.integers(0, N_ACTIONS, len(ids)))}
            step(world, actions)
        if not steps:
            raise DataError("collected an episode with no alive agents at t=0")
        buffer.append(EpisodeRecord(steps=steps))
    return buffer


def _block_diag(blocks: list[np.ndarray], dtype) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=dtype)
    at = 0
    for b in blocks:
        k = b.shape[0]
        out[at:at + k, at:at + k] = b
        at += k
    return out


def _batch_loss(encoder: NvifEncoder, episodes: list[EpisodeRecord], alpha: float,
                recon_weight: float, rng: np.random.Generator):
    """Episode-batch loss tensor plus the averaged term values."""
    dt = encoder.config.np_dtype
    n_slots = sum(len(ep.steps) for ep in episodes)
    t_max = max(len(ep.steps) for ep in episodes)
    prev_rows: dict = {}
    hidden_prev: Tensor | None = None
    total = None
    recon_val = kl_val = cons_val = 0.0
    for t in range(t_max):
        live = [(i, ep.steps[t]) for i, ep in enumerate(episodes) if len(ep.steps) > t]
        sizes = [len(sd.ids) for _, sd in live]
        feats = Tensor(np.concatenate([sd.feats for _, sd in live]))
        raw = np.concatenate([sd.raw_obs for _, sd in live])
        pos = np.concatenate([sd.positions for _, sd in live])
        adj = _block_diag([sd.adj_norm for _, sd in live], dt)
        center = _block_diag([np.full((k, k), 1.0 / k, dtype=dt) for k in sizes], dt)
        weights = np.concatenate([np.full(k, 1.0 / (k * n_slots), dtype=np.float64)
                                  for k in sizes])

        cur_keys = [(i, a) for i, sd in live for a in sd.ids]
        if hidden_prev is None:
            hidden = Tensor(np.zeros((len(cur_keys), encoder.config.hidden_width), dtype=dt))
        else:
            hidden = gather_rows(hidden_prev, [prev_rows[k] for k in cur_keys])

        phi = flownet_forward(feats, adj, encoder.flow_o)
        psi = flownet_forward(hidden, adj, encoder.flow_h)
        h_next = gru_cell(phi, psi, encoder._gru)
        mu = affine(h_next, encoder.store["head/mu_w"], encoder.store["head/mu_b"])
        log_sigma = clamp(affine(h_next, encoder.store["head/ls_w"], encoder.store["head/ls_b"]),
                          -10.0, 4.0)
        eps = rng.standard_normal(mu.data.shape).astype(dt)
        latent = gaussian_sample(mu, log_sigma, eps=eps)
        o_hat = encoder.decode(latent, pos)

        recon_t = tsum(mul(bce_loss(raw, o_hat, axis=1), weights))
        per_dim = mul(mu, mu) + exp(mul(log_sigma, 2.0)) - 1.0 - mul(log_sigma, 2.0)
        kl_t = tsum(mul(mul(tsum(per_dim, axis=1), 0.5), weights))
        dev = sub(latent, sparse_matmul(center, latent))
        cons_t = tsum(mul(tsum(mul(dev, dev), axis=1), weights))

        contrib = mul(recon_t, recon_weight) + kl_t
        if alpha != 0.0:
            contrib = contrib + mul(cons_t, alpha)
        total = contrib if total is None else total + contrib
        recon_val += recon_weight * float(recon_t.data)
        kl_val += float(kl_t.data)
        cons_val += float(cons_t.data)

        hidden_prev = h_next
        prev_rows = {k: r for r, k in enumerate(cur_keys)}
    return total, recon_val, kl_val, cons_val, n_slots


def pretrain(buffer: list[EpisodeRecord], hyper: PretrainHyper, encoder: NvifEncoder):
    """Optimize encoder and decoder over the buffer; returns (encoder, history).

    One epoch iterates every episode once in seeded-shuffled batches. With
    ``stop_recon_frac`` set, training ends as soon as the epoch reconstruction
    term falls to that fraction of the first epoch's and the consistency term
    is below its first-epoch value.
    """
    if not buffer:
        raise DataError("pretrain: empty episode buffer")
    rng = np.random.default_rng(hyper.seed)
    history: list[NvifLossReport] = []
    for _ in range(hyper.epochs):
        order = rng.permutation(len(buffer))
        sums = np.zeros(3)
        slots = 0
        for lo in range(0, len(order), hyper.batch_episodes):
            episodes = [buffer[i] for i in order[lo:lo + hyper.batch_episodes]]
            total, recon, kl, cons, n_slots = _batch_loss(
                encoder, episodes, hyper.alpha, hyper.recon_weight, rng)
            encoder.store.zero_grad()
            backward(total)
            optimizer_step(encoder.store, lr=hyper.lr)
            sums += np.array([recon, kl, cons]) * n_slots
            slots += n_slots
        recon, kl, cons = sums / slots
        history.append(NvifLossReport(
            recon=recon, kl=kl, consistency=cons,
            total=recon + kl + hyper.alpha * cons, alpha=hyper.alpha))
        if (hyper.stop_recon_frac is not None and len(history) > 1
                and recon <= hyper.stop_recon_frac * history[0].recon
                and cons < history[0].consistency):
            break
    return encoder, history


def pretrain_loss(buffer, encoder: NvifEncoder, alpha: float, recon_weight: float,
                  seed: int, batch_episodes: int = 16) -> NvifLossReport:
    """Loss of a frozen model over the buffer; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    sums = np.zeros(3)
    slots = 0
    with no_grad():
        for lo in range(0, len(buffer), batch_episodes):
            episodes = buffer[lo:lo + batch_episodes]
            _, recon, kl, cons, n_slots = _batch_loss(encoder, episodes, alpha,
                                                      recon_weight, rng)
            sums += np.array([recon, kl, cons]) * n_slots
            slots += n_slots
    recon, kl, cons = sums / slots
    return NvifLossReport(recon=recon, kl=kl, consistency=cons,
                          total=recon + kl + alpha * cons, alpha=alpha)
