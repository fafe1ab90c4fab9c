"""Replay export: JSON-lines, one header then one record per timestep.

Replays are self-sufficient: evaluation metrics (return, end step, fraction
of food eaten) can be recomputed from the file alone.
"""
from __future__ import annotations

import json
from dataclasses import asdict

from .world import GridWorld, StepResult


class ReplayWriter:
    """One file may hold several episodes, each opened by a header line."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def start_episode(self, world: GridWorld):
        header = {
            "kind": "header",
            "config": asdict(world.config),
            "units": [
                {"id": i, "unit": u.kind, "x": u.x, "y": u.y, "hp": u.hp}
                for i, u in enumerate(world.units)
            ],
        }
        self._fh.write(json.dumps(header) + "\n")

    def write_step(self, world: GridWorld, actions: dict[int, int],
                   result: StepResult, edges=None):
        record = {
            "t": world.t,
            "positions": {str(i): [u.x, u.y] for i, u in enumerate(world.units) if u.alive},
            "hps": {str(i): u.hp for i, u in enumerate(world.units) if u.alive},
            "actions": {str(i): int(a) for i, a in actions.items()},
            "rewards": {str(i): r for i, r in result.rewards.items()},
            "alive": sorted(i for i, ok in result.alive.items() if ok),
            "food_remaining": result.food_remaining,
        }
        if edges is not None:
            record["edges"] = [list(e) for e in edges]
        self._fh.write(json.dumps(record) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def read_replay(path):
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    episodes = []
    header = None
    for line in lines:
        if line.get("kind") == "header":
            header = line
            episodes.append((header, []))
        else:
            episodes[-1][1].append(line)
    return episodes


def episode_metrics(header: dict, records: list[dict]) -> dict:
    """Recompute evaluation metrics from a single episode's replay records."""
    episode_return = sum(r for rec in records for r in rec["rewards"].values())
    total_food = header["config"]["n_food"]
    final_left = records[-1]["food_remaining"] if records else total_food
    return {
        "return": episode_return,
        "end_steps": records[-1]["t"] if records else 0,
        "food_eaten_frac": (total_food - final_left) / total_food,
    }
