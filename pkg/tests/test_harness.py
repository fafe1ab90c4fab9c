"""Experiment configs, CLI exit codes, evaluation, scalability, resumability."""
import json

import numpy as np
import pytest

from nviflab.env_gather import preset, read_replay, episode_metrics
from nviflab.errors import ConfigError, DataError
from nviflab.harness import (
    PolicyBundle,
    evaluate,
    load_experiment,
    normalize_matrix,
    scalability_matrix,
)
from nviflab.harness.cli import main as cli_main
from nviflab.policy import PPOHyper, train_ppo


def write_config(path, **overrides):
    cfg = {
        "task": "desk-random-12",
        "out_dir": str(path.parent / "out"),
        "seeds": [0],
        "algorithm": "ippo",
        "obs_vae": {"latent_width": 8, "hidden_width": 32, "epochs": 2,
                    "corpus_episodes": 3, "corpus_max_samples": 600},
        "ppo": {"epochs": 1, "episodes_per_epoch": 2},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


class TestExperimentConfig:
    def test_valid_loads(self, tmp_path):
        cfg = load_experiment(write_config(tmp_path / "c.json"))
        assert cfg.task == "desk-random-12"
        assert cfg.task_config().map_size == 12

    def test_unknown_top_key_rejected(self, tmp_path):
        path = write_config(tmp_path / "c.json", mystery_knob=1)
        with pytest.raises(ConfigError) as err:
            load_experiment(path)
        assert "mystery_knob" in str(err.value)

    def test_unknown_section_key_rejected(self, tmp_path):
        path = write_config(tmp_path / "c.json", ppo={"epochs": 1, "klip": 0.3})
        with pytest.raises(ConfigError) as err:
            load_experiment(path)
        assert "klip" in str(err.value)

    def test_unknown_algorithm_rejected(self, tmp_path):
        path = write_config(tmp_path / "c.json", algorithm="sarsa")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_env_overrides_apply(self, tmp_path):
        path = write_config(tmp_path / "c.json", env={"view_radius": 3})
        cfg = load_experiment(path)
        assert cfg.task_config().view_radius == 3


class TestCliExitCodes:
    def test_invalid_config_exits_1(self, tmp_path):
        path = write_config(tmp_path / "c.json", bogus_key=True)
        assert cli_main(["train", "--config", str(path)]) == 1

    def test_unknown_algorithm_exits_1(self, tmp_path):
        path = write_config(tmp_path / "c.json", algorithm="q-zero")
        assert cli_main(["train", "--config", str(path)]) == 1

    def test_missing_compressor_checkpoint_exits_2(self, tmp_path):
        path = write_config(tmp_path / "c.json")
        assert cli_main(["train", "--config", str(path)]) == 2

    def test_missing_encoder_checkpoint_exits_2(self, tmp_path):
        path = write_config(tmp_path / "c.json", algorithm="nvif-ppo")
        code = cli_main(["pretrain-obs", "--config", str(path)])
        assert code == 0
        assert cli_main(["train", "--config", str(path)]) == 2

    def test_eval_missing_bundle_exits_2(self, tmp_path):
        path = write_config(tmp_path / "c.json")
        assert cli_main(["eval", "--config", str(path),
                         "--policy", str(tmp_path / "nowhere")]) == 2


class TestCliPipeline:
    def test_ippo_workflow(self, tmp_path):
        path = write_config(tmp_path / "c.json")
        assert cli_main(["pretrain-obs", "--config", str(path)]) == 0
        assert cli_main(["train", "--config", str(path)]) == 0
        out = tmp_path / "out"
        run = out / "train-ippo-seed0"
        assert (run / "metrics.csv").exists()
        assert (run / "bundle" / "bundle.json").exists()
        assert cli_main(["eval", "--config", str(path),
                         "--policy", str(run / "bundle"), "--episodes", "2"]) == 0
        metrics = json.loads((out / "eval" / "metrics.json").read_text())
        assert set(metrics) >= {"mean_return", "mean_end_steps", "food_eaten_frac"}

    def test_replay_dump_random_policy(self, tmp_path):
        path = write_config(tmp_path / "c.json")
        assert cli_main(["replay-dump", "--config", str(path),
                         "--policy", "random", "--episodes", "2"]) == 0
        episodes = read_replay(tmp_path / "out" / "replay" / "replay.jsonl")
        assert len(episodes) == 2
        assert "edges" in episodes[0][1][0]


class TestEvaluate:
    def test_noop_policy_random_task(self):
        task = preset("random-small", seed=0)
        metrics = evaluate("noop", task, episodes=2, seed=1)
        assert metrics["food_eaten_frac"] == 0.0
        assert metrics["mean_end_steps"] == 100.0

    def test_random_policy_eats_some_but_not_all(self):
        task = preset("normal-small", seed=0)
        metrics = evaluate("random", task, episodes=3, seed=1)
        assert metrics["food_eaten_frac"] < 1.0

    def test_deterministic_given_seed(self, tiny_task, tiny_compressor):
        res = train_ppo(tiny_task, tiny_compressor,
                        PPOHyper(epochs=1, episodes_per_epoch=2, seed=0),
                        latent_mode="none")
        bundle = PolicyBundle("ippo", "none", "desk-random-12", tiny_compressor,
                              actor_critic=res.actor_critic)
        m1 = evaluate(bundle, tiny_task, episodes=3, seed=5)
        m2 = evaluate(bundle, tiny_task, episodes=3, seed=5)
        assert m1 == m2

    def test_metrics_recomputable_from_replay(self, tmp_path, tiny_task):
        replay = tmp_path / "r.jsonl"
        metrics = evaluate("random", tiny_task, episodes=3, seed=2, replay_path=replay)
        episodes = read_replay(replay)
        per_ep = [episode_metrics(h, recs) for h, recs in episodes]
        assert np.mean([m["return"] for m in per_ep]) == pytest.approx(
            metrics["mean_return"])
        assert np.mean([m["end_steps"] for m in per_ep]) == pytest.approx(
            metrics["mean_end_steps"])
        assert np.mean([m["food_eaten_frac"] for m in per_ep]) == pytest.approx(
            metrics["food_eaten_frac"])

    def test_bundle_width_mismatch_rejected(self, tiny_task, tiny_compressor):
        res = train_ppo(tiny_task, tiny_compressor,
                        PPOHyper(epochs=1, episodes_per_epoch=1, seed=0),
                        latent_mode="none")
        bundle = PolicyBundle("ippo", "none", "desk-random-12", tiny_compressor,
                              actor_critic=res.actor_critic)
        other = preset("desk-normal-16", seed=0, view_radius=4)
        with pytest.raises(ConfigError):
            bundle.check_task(other)


class TestScalability:
    def test_normalization_mechanics(self):
        raw = np.array([[10.0, 2.0], [5.0, 4.0]])
        scores = normalize_matrix(raw)
        np.testing.assert_allclose(scores, [[1.0, 0.5], [0.5, 1.0]])
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0)
        assert np.all(scores.max(axis=0) == 1.0)

    def test_negative_entries_clamped(self):
        scores = normalize_matrix(np.array([[4.0, -3.0], [-2.0, 6.0]]))
        np.testing.assert_allclose(scores, [[1.0, 0.0], [0.0, 1.0]])

    def test_nonpositive_column_rejected(self):
        with pytest.raises(DataError):
            normalize_matrix(np.array([[1.0, -2.0], [0.5, -0.1]]))

    def test_matrix_over_tasks(self, tiny_task, tiny_compressor):
        # two stub policies; scores normalized per task column
        res = train_ppo(tiny_task, tiny_compressor,
                        PPOHyper(epochs=1, episodes_per_epoch=1, seed=0),
                        latent_mode="none")
        bundle = PolicyBundle("ippo", "none", "desk-random-12", tiny_compressor,
                              actor_critic=res.actor_critic)
        rows, cols, raw, scores = scalability_matrix(
            [("a", bundle), ("b", bundle)],
            [("t1", tiny_task)], episodes=1, seed=0)
        assert scores.shape == (2, 1)
        np.testing.assert_allclose(scores.max(axis=0), 1.0)


class TestResume:
    def test_checkpoint_resume_bit_identical(self, tmp_path, tiny_task, tiny_compressor):
        hyper = PPOHyper(epochs=4, episodes_per_epoch=2, seed=11)
        full_dir = tmp_path / "full"
        res_full = train_ppo(tiny_task, tiny_compressor, hyper,
                             latent_mode="none", out_dir=full_dir)

        part_dir = tmp_path / "part"
        train_ppo(tiny_task, tiny_compressor,
                  PPOHyper(epochs=2, episodes_per_epoch=2, seed=11),
                  latent_mode="none", out_dir=part_dir)
        res_resumed = train_ppo(tiny_task, tiny_compressor, hyper,
                                latent_mode="none", out_dir=part_dir, resume=True)

        assert res_full.metrics == res_resumed.metrics
        assert (full_dir / "metrics.csv").read_bytes() == \
               (part_dir / "metrics.csv").read_bytes()
