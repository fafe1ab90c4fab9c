"""Desk-scale multi-agent communication lab: the Gather grid-world, dynamic
neighbor graphs, a reverse-mode autodiff core, a pre-trained variational
communication encoder, and PPO/DQN trainers with agent-specific rewards."""

__version__ = "0.1.0"
