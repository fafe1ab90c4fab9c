"""Command-line orchestration.

Exit codes: 0 success, 1 invalid configuration (offending keys are listed),
2 missing checkpoint.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigError
from .bundle import PolicyBundle
from .config import load_experiment
from .evaluate import evaluate
from .pipeline import (
    load_compressor,
    load_encoder,
    run_pretrain_nvif,
    run_pretrain_obs,
    run_training,
    train_run_dir,
)
from .scalability import scalability_matrix, write_matrix_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nviflab",
        description="Gather-game experiments with neighboring variational "
                    "information flow")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="experiment JSON path")
        return p

    with_config(sub.add_parser("pretrain-obs", help="train the observation compressor"))
    with_config(sub.add_parser("pretrain-nvif", help="train the communication encoder"))

    p = with_config(sub.add_parser("train", help="run the configured trainer"))
    p.add_argument("--resume", action="store_true", help="continue from checkpoint")
    p.add_argument("--seed", type=int, default=None,
                   help="train only this seed (default: every seed in config)")

    p = with_config(sub.add_parser("eval", help="evaluate a policy"))
    p.add_argument("--policy", default=None,
                   help="bundle dir, or built-ins 'random' / 'noop' "
                        "(default: config policy_checkpoint)")
    p.add_argument("--episodes", type=int, default=None)

    p = with_config(sub.add_parser("scalability", help="cross-task score matrix"))

    p = with_config(sub.add_parser("replay-dump", help="export replay JSONL"))
    p.add_argument("--policy", default=None)
    p.add_argument("--episodes", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_experiment(args.config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args, cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _dispatch(args, cfg) -> int:
    out = cfg.out_path
    if args.command == "pretrain-obs":
        run_pretrain_obs(cfg)
        print(f"observation compressor saved under {out / 'obs_vae'}")
        return 0

    if args.command == "pretrain-nvif":
        _, history = run_pretrain_nvif(cfg)
        print(f"encoder saved under {out / 'encoder'}; "
              f"final recon {history[-1].recon:.4f} after {len(history)} epochs")
        return 0

    if args.command == "train":
        seeds = [args.seed] if args.seed is not None else cfg.seeds
        for seed in seeds:
            run_dir = run_training(cfg, seed, resume=args.resume)
            print(f"seed {seed}: metrics and bundle under {run_dir}")
        return 0

    if args.command == "eval":
        source = args.policy or cfg.policy_checkpoint
        if source is None:
            raise ConfigError("eval needs --policy or policy_checkpoint in the config")
        section = cfg.eval
        episodes = args.episodes or section.get("episodes", 10)
        task_cfg = cfg.task_config()
        if source not in ("random", "noop"):
            bundle = PolicyBundle.load(source)
            bundle.check_task(task_cfg)
            source = bundle
        out.mkdir(parents=True, exist_ok=True)
        eval_dir = out / "eval"
        eval_dir.mkdir(parents=True, exist_ok=True)
        replay = eval_dir / "replay.jsonl" if section.get("replay", False) else None
        metrics = evaluate(source, task_cfg, episodes,
                           seed=section.get("seed", 0),
                           replay_path=replay, greedy=section.get("greedy"))
        with open(eval_dir / "metrics.json", "w") as fh:
            json.dump(metrics, fh, indent=1)
        print(json.dumps(metrics))
        return 0

    if args.command == "scalability":
        section = cfg.scalability
        if not section.get("policies") or not section.get("tasks"):
            raise ConfigError("scalability needs 'policies' and 'tasks' lists in the config")
        policies = []
        for entry in section["policies"]:
            path = Path(entry)
            if not (path / "bundle.json").exists():
                raise FileNotFoundError(f"no policy bundle at {path}")
            policies.append((path.name, PolicyBundle.load(path)))
        from ..env_gather import preset
        tasks = [(name, preset(name, **cfg.env)) for name in section["tasks"]]
        rows, cols, raw, scores = scalability_matrix(
            policies, tasks, episodes=section.get("episodes", 10),
            seed=section.get("seed", 0))
        mat_dir = out / "scalability"
        mat_dir.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(mat_dir / "matrix.csv", rows, cols, scores)
        write_matrix_csv(mat_dir / "raw_returns.csv", rows, cols, raw)
        print(f"matrix written to {mat_dir / 'matrix.csv'}")
        return 0

    if args.command == "replay-dump":
        source = args.policy or cfg.policy_checkpoint
        if source is None:
            raise ConfigError("replay-dump needs --policy or policy_checkpoint")
        task_cfg = cfg.task_config()
        if source not in ("random", "noop"):
            bundle = PolicyBundle.load(source)
            bundle.check_task(task_cfg)
            source = bundle
        replay_dir = out / "replay"
        replay_dir.mkdir(parents=True, exist_ok=True)
        path = replay_dir / "replay.jsonl"
        evaluate(source, task_cfg, args.episodes,
                 seed=cfg.eval.get("seed", 0), replay_path=path)
        print(f"replay written to {path}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
