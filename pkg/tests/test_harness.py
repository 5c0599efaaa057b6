import io
import json
import random

import numpy as np
import pytest
import yaml

from curiosity_lab.core import rollout
from curiosity_lab.envs import exercise as ex
from curiosity_lab.errors import ConfigError
from curiosity_lab.evaluation import evaluate, run_episodes
from curiosity_lab.harness.checkpoint import checkpoint_from_record, checkpoint_to_record, load_checkpoint, save_checkpoint
from curiosity_lab.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, run_subcommand
from curiosity_lab.harness.config import ExperimentConfig
from curiosity_lab.harness.experiments import bundled_config, bundled_config_names, crossing_step, run_config, success_at
from curiosity_lab.harness.scripted import ScriptedAgent
from curiosity_lab.trainer import Checkpoint, IterationMetrics, PolicyTable, Trainer, ValueTable
from curiosity_lab.user_model import StrategyClassifierEngine


def play_scripted(env, user, seed=0):
    return rollout(env, ScriptedAgent(env), StrategyClassifierEngine(env), user, seed)


def relevant_asks(env, traj):
    return [env.attribute_of(t.action) for t in traj.turns if env.attribute_of(t.action) is not None]


class TestScripted:
    def test_first_question_injury(self, exercise_env):
        traj = play_scripted(exercise_env, ex.all_relevant_profiles()[0])
        assert exercise_env.attribute_of(traj.turns[0].action) == "injury"

    @pytest.mark.parametrize("idx", range(48))
    def test_all_combinations(self, exercise_env, idx):
        user = ex.all_relevant_profiles()[idx]
        traj = play_scripted(exercise_env, user, idx)
        assert traj.extrinsic == 1.0
        asks = relevant_asks(exercise_env, traj)
        assert len(asks) <= 5 and len(set(asks)) == len(asks)

    def test_recommends_seven(self, exercise_env):
        user = ex.profile_from_answers(False, False, False, False, "medium")
        assert ex.ground_truth_strategy(user) == 7
        traj = play_scripted(exercise_env, user)
        assert traj.turns[-1].action == exercise_env.recommend_action(7)
        assert relevant_asks(exercise_env, traj) == ["injury", "outdoor", "ses", "personality", "motivation"]

    def test_injured_stops_after_two(self, exercise_env):
        user = ex.profile_from_answers(True, True, True, True, "low")
        assert relevant_asks(exercise_env, play_scripted(exercise_env, user)) == ["injury", "outdoor"]

    def test_variable_length_recommends_early(self):
        env = ex.ExerciseEnv(ex.ExerciseEnvConfig(variable_length=True, horizon=10))
        traj = play_scripted(env, ex.profile_from_answers(True, False, True, True, "high"))
        assert len(traj) == 3 and traj.extrinsic == 1.0


class TestEvaluation:
    def test_reproducible(self, exercise_env):
        corpus = ex.generate_corpus(100, (80, 20), seed=1)
        engine = StrategyClassifierEngine(exercise_env)
        pol = PolicyTable(exercise_env.num_actions)
        a = evaluate(pol.act, exercise_env, corpus.eval, 40, 7, engine)
        b = evaluate(pol.act, exercise_env, corpus.eval, 40, 7, engine)
        assert a == b

    def test_histogram_totals(self, exercise_env):
        corpus = ex.generate_corpus(100, (80, 20), seed=1)
        engine = StrategyClassifierEngine(exercise_env)
        pol = PolicyTable(exercise_env.num_actions)
        trajs = run_episodes(pol.act, exercise_env, corpus.eval, 30, 3, engine)
        rep = evaluate(pol.act, exercise_env, corpus.eval, 30, 3, engine)
        asks = sum(1 for t in trajs for turn in t.turns
                   if exercise_env.action_kind(turn.action).name == "ASK")
        assert sum(rep.question_histogram) == asks
        assert sum(map(sum, rep.confusion)) == 30

    def test_uniform_policy_near_chance(self, exercise_env):
        corpus = ex.generate_corpus(1000, (800, 200), seed=2)
        engine = StrategyClassifierEngine(exercise_env)
        rep = evaluate(PolicyTable(exercise_env.num_actions).act, exercise_env, corpus.eval, 2000, 0, engine)
        assert abs(rep.success_rate - 0.125) < 0.03

    def test_scripted_third_turn_positive(self, exercise_env):
        corpus = ex.generate_corpus(100, (80, 20), seed=1)
        rep = evaluate(ScriptedAgent(exercise_env), exercise_env, corpus.eval, 100, 0,
                       StrategyClassifierEngine(exercise_env))
        assert rep.success_rate == 1.0
        assert rep.third_turn_calibrated_accuracy > 0.2


class TestConfig:
    def test_bundled_configs_load(self):
        names = bundled_config_names()
        assert "exercise_diffacc" in names and "style_difflogacc" in names
        for n in names:
            bundled_config(n)

    @pytest.mark.parametrize("rec", [
        {"env": {"name": "exercise"}},
        {"seed": 0, "bogus": 1},
        {"seed": 0, "env": {"name": "chess"}},
        {"seed": "x"},
        {"seed": 0, "shaping": "nope"},
        {"seed": 0, "user_model": {"kind": "oracle"}},
        {"seed": 0, "env": {"name": "style"}, "user_model": {"kind": "classifier"}},
    ])
    def test_rejected(self, rec):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping(rec)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "none.yaml")

    def test_record_round_trip(self):
        cfg = bundled_config("exercise_diffacc")
        assert ExperimentConfig.from_mapping(cfg.to_record()).to_record() == cfg.to_record()

    def test_with_seed_reseeds_corpus(self):
        cfg = bundled_config("exercise_sparse")
        env = cfg.build_env()
        a = cfg.with_seed(1).build_corpus(env)
        b = cfg.with_seed(2).build_corpus(env)
        assert a.train != b.train
        pinned = ExperimentConfig.from_mapping(dict(cfg.to_record(), corpus={"size": 100, "split": [80, 20], "seed": 5}))
        assert pinned.with_seed(1).build_corpus(env) == pinned.with_seed(2).build_corpus(env)


class TestStreams:
    def stream(self, rates):
        return [IterationMetrics(step=i * 10, mean_extrinsic=r, mean_intrinsic=0.0, mean_kl=0.0, success_rate=r,
                                 third_turn_calibrated_accuracy=0.0, mean_episode_length=1.0,
                                 question_histogram=[]) for i, r in enumerate(rates)]

    def test_crossing(self):
        s = self.stream([0.1, 0.5, 0.92, 0.8])
        assert crossing_step(s, 0.9) == 20
        assert crossing_step(s, 0.95) == float("inf")

    def test_success_at(self):
        s = self.stream([0.1, 0.5, 0.92])
        assert success_at(s, 15) == 0.5
        assert success_at(s, float("inf")) == 0.92


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        cfg = bundled_config("exercise_diffacc")
        stream, tr = run_config(cfg, {"total_steps": 64, "eval_every": 64, "eval_episodes": 10})
        ckpt = Checkpoint(tr.step, stream[-1].mean_extrinsic, tr.policy, tr.value)
        path = tmp_path / "c.json"
        save_checkpoint(path, ckpt, cfg.to_record())
        back, exp = load_checkpoint(path)
        assert exp == cfg.to_record()
        assert back.step == ckpt.step
        env = cfg.build_env()
        obs = env.initial_observation()
        valid = env.valid_actions(obs)
        assert back.policy.probs(back.policy.key_fn(obs), valid) == tr.policy.probs(tr.policy.key_fn(obs), valid)
        rec = checkpoint_to_record(ckpt, cfg.to_record())
        assert json.loads(json.dumps(rec)) == rec
        assert checkpoint_from_record(rec)[0].value.get(()) == tr.value.get(())

    def test_training_deterministic(self):
        cfg = bundled_config("exercise_diffacc")
        over = {"total_steps": 96, "eval_every": 48, "eval_episodes": 20}
        a, _ = run_config(cfg, over)
        b, _ = run_config(cfg, over)
        assert [m.to_record() for m in a] == [m.to_record() for m in b]


SMALL = {
    "seed": 3,
    "env": {"name": "exercise", "horizon": 6},
    "shaping": "diffacc",
    "trainer": {"horizon": 6, "batch_size": 8, "total_steps": 48, "eval_every": 24, "eval_episodes": 10,
                "lr_policy": 3.0, "alpha_int": 5.0, "alpha_ext": 3.0},
    "corpus": {"size": 50, "split": [40, 10]},
}


def cli(*argv):
    buf = io.StringIO()
    code = run_subcommand(list(argv), buf)
    return code, buf.getvalue()


class TestCLI:
    @pytest.fixture
    def config(self, tmp_path):
        p = tmp_path / "small.yaml"
        p.write_text(yaml.safe_dump(SMALL))
        return p

    def test_train_eval_replay(self, tmp_path, config):
        out = tmp_path / "run"
        code, text = cli("train", "--config", str(config), "--out", str(out))
        assert code == EXIT_OK and json.loads(text)["steps"] == 48
        lines = (out / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 3
        traj = tmp_path / "t.jsonl"
        code, text = cli("eval", "--checkpoint", str(out / "checkpoint.json"), "--episodes", "5",
                         "--trajectories", str(traj))
        assert code == EXIT_OK and json.loads(text)["episodes"] == 5
        assert cli("replay", "--trajectory", str(traj))[0] == EXIT_OK
        rows = traj.read_text().splitlines()
        rec = json.loads(rows[-1])
        assert rec["record"] == "turn"
        rec["r_ext"] = 42.0
        rows[-1] = json.dumps(rec)
        traj.write_text("\n".join(rows) + "\n")
        assert cli("replay", "--trajectory", str(traj))[0] == EXIT_VERIFY

    def test_train_byte_identical(self, tmp_path, config):
        for d in ("a", "b"):
            assert cli("train", "--config", str(config), "--out", str(tmp_path / d))[0] == EXIT_OK
        for f in ("metrics.jsonl", "checkpoint.json", "best.json", "config.yaml"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_scripted_eval(self):
        code, text = cli("eval", "--agent", "scripted", "--episodes", "50")
        assert code == EXIT_OK and json.loads(text)["success_rate"] == 1.0

    def test_gen_profiles(self, tmp_path):
        p = tmp_path / "c.jsonl"
        assert cli("gen-profiles", "--n", "20", "--split", "15,5", "--out", str(p))[0] == EXIT_OK
        with open(p) as fh:
            corpus = ex.read_corpus(fh)
        assert (len(corpus.train), len(corpus.eval)) == (15, 5)
        assert cli("gen-profiles", "--n", "20", "--split", "10,5")[0] == EXIT_CONFIG

    def test_bandit(self):
        code, text = cli("bandit", "--trials", "3", "--sigma", "0")
        rec = json.loads(text)
        assert code == EXIT_OK and rec["semi"]["success_rate"] == 1.0

    def test_verify_pbrs(self):
        assert cli("verify-pbrs", "--instance", "toy", "--toy-seed", "2", "--gamma", "0.9", "1.0")[0] == EXIT_OK
        code, text = cli("verify-pbrs", "--instance", "toy", "--toy-seed", "2", "--inject", "ent")
        assert code == EXIT_OK and json.loads(text)["checks"] == 1

    @pytest.mark.parametrize("argv", [
        ("train", "--config", "no_such_config"),
        ("eval", "--checkpoint", "/nonexistent.json"),
        ("eval",),
        ("eval", "--agent", "scripted", "--split", "test"),
        ("frobnicate",),
        ("bandit", "--K", "notanint"),
    ])
    def test_config_errors(self, argv):
        assert cli(*argv)[0] == EXIT_CONFIG
