"""Acceptance criteria 1-14. Each test records one summary line, printed after the run."""

import io
import math
import random
import time

import numpy as np
import pytest
import yaml

from conftest import ACCEPTANCE
from helpers import TRUTH_ROWS, discounted_return, gae_direct, random_gradient_case, relative_error
from curiosity_lab.core import rollout
from curiosity_lab.envs import exercise as ex
from curiosity_lab.harness.cli import run_subcommand
from curiosity_lab.harness.experiments import (
    bundled_config,
    personalization_study,
    reward_hacking_probe,
    sample_efficiency_study,
)
from curiosity_lab.harness.scripted import ScriptedAgent
from curiosity_lab.shaping import PotentialKind, ShapingConfig, ShapingKind, make_intrinsic, potential
from curiosity_lab.trainer import gae_propagate
from curiosity_lab.user_model import AnswerSheet, StrategyClassifierEngine, all_answer_sheets, strategy_distribution
from curiosity_lab.verify import bandits as bd
from curiosity_lab.verify.belief_mdp import TOY_SEEDS, check_pbrs_invariance, reduced_exercise_mdp, toy_mdp

SEEDS = range(10)


def record(num, ok, detail):
    ACCEPTANCE[num] = (bool(ok), detail)
    assert ok, detail


def test_c01_truth_table():
    t = time.perf_counter()
    bad = 0
    for inj, out, ext, mot, ses, want in TRUTH_ROWS:
        bad += ex.ground_truth_strategy(ex.profile_from_answers(inj, out, ext, mot, ses)) != want
    secs = time.perf_counter() - t
    record(1, len(TRUTH_ROWS) == 48 and bad == 0 and secs < 1.0,
           f"{len(TRUTH_ROWS)} rows, {bad} mismatches, {secs:.3f}s")


def test_c02_marginals():
    rng = np.random.default_rng(2024)
    n = 100_000
    counts = [0] * 8
    injured = 0
    for _ in range(n):
        p = ex.sample_profile(rng)
        counts[ex.ground_truth_strategy(p) - 1] += 1
        injured += p.injury
    want = (0.112, 0.168, 0.1728, 0.1152, 0.0864, 0.10368, 0.10368, 0.13824)
    worst = max(abs(c / n - w) for c, w in zip(counts, want))
    p_inj = injured / n
    record(2, worst <= 0.01 and abs(p_inj - 0.28) <= 0.01,
           f"max marginal error {worst:.4f}, P(injury)={p_inj:.4f}")


def test_c03_answer_sheets():
    sheets = list(all_answer_sheets())
    worst = max(abs(math.fsum(strategy_distribution(s)) - 1.0) for s in sheets)
    unknown = strategy_distribution(AnswerSheet())
    exact = unknown == pytest.approx((0.10, 0.15, 0.18, 0.12, 0.09, 0.108, 0.108, 0.144), abs=1e-12)
    record(3, len(sheets) == 243 and worst <= 1e-9 and exact,
           f"{len(sheets)} sheets, max |sum-1|={worst:.1e}, all-unknown exact={exact}")


def test_c04_pbrs_invariance():
    t = time.perf_counter()
    instances = [reduced_exercise_mdp()] + [toy_mdp(s) for s in TOY_SEEDS]
    checks = fails = 0
    for mdp in instances:
        for gamma in (0.9, 0.95, 1.0):
            for kind in PotentialKind:
                checks += 1
                fails += not check_pbrs_invariance(mdp, kind, gamma).argmax_sets_equal
    secs = time.perf_counter() - t
    record(4, fails == 0 and secs < 60.0, f"{checks} checks, {fails} changed argmax sets, {secs:.1f}s")


def test_c05_telescoping():
    env = ex.ExerciseEnv()
    engine = StrategyClassifierEngine(env)
    corpus = ex.generate_corpus(100, (80, 20), seed=5)
    cfg = ShapingConfig(1.0, 1e-6, env.num_types)
    kinds = (ShapingKind.DIFFACC, ShapingKind.DIFFLOGACC, ShapingKind.DIFFENT)
    rng = random.Random(5)
    worst = 0.0
    for i in range(1000):
        kind = kinds[i % 3]

        def act(obs, valid, r):
            return valid[r.randrange(len(valid))]

        traj = rollout(env, act, engine, corpus.train[i % 80], rng.getrandbits(32), make_intrinsic(kind, cfg))
        total = math.fsum(t.r_int for t in traj.turns)
        u = traj.user_type
        want = potential(kind.potential, traj.turns[-1].belief_after, u) - potential(kind.potential, engine.prior(), u)
        worst = max(worst, abs(total - want))
    record(5, worst <= 1e-9, f"1000 episodes, max telescoping error {worst:.1e}")


def test_c06_gradient():
    worst = max(relative_error(*random_gradient_case(seed, eps=1e-5)) for seed in range(100))
    record(6, worst < 1e-4, f"100 states, max relative error {worst:.2e}")


def test_c07_gae():
    rng = random.Random(7)
    worst = 0.0
    worst_ret = 0.0
    for _ in range(1000):
        n = rng.randint(1, 12)
        rewards = [rng.uniform(-2, 2) for _ in range(n)]
        values = [rng.uniform(-2, 2) for _ in range(n)] + [0.0]
        gamma, lam = rng.uniform(0.5, 1.0), rng.uniform(0.0, 1.0)
        got = gae_propagate(rewards, values, gamma, lam)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, gae_direct(rewards, values, gamma, lam))))
        ret = gae_propagate(rewards, [0.0] * (n + 1), gamma, 1.0)
        worst_ret = max(worst_ret, max(abs(a - b) for a, b in zip(ret, discounted_return(rewards, gamma))))
    record(7, worst <= 1e-9 and worst_ret <= 1e-9,
           f"1000 draws, max error {worst:.1e}, lambda=1 return error {worst_ret:.1e}")


def test_c08_scripted_agent():
    env = ex.ExerciseEnv()
    engine = StrategyClassifierEngine(env)
    agent = ScriptedAgent(env)
    rng = np.random.default_rng(8)
    users = ex.all_relevant_profiles() + [ex.sample_profile(rng) for _ in range(200)]
    wins = sum(rollout(env, agent, engine, u, i).extrinsic == 1.0 for i, u in enumerate(users))
    record(8, wins == len(users), f"{wins}/{len(users)} correct (48 combinations + 200 sampled)")


@pytest.fixture(scope="module")
def efficiency():
    t = time.perf_counter()
    res = sample_efficiency_study(bundled_config("exercise_diffacc"), bundled_config("exercise_sparse"), SEEDS)
    return res, time.perf_counter() - t


@pytest.mark.slow
def test_c09_sample_efficiency(efficiency):
    res, secs = efficiency
    shaped, sparse = res.median_shaped_crossing, res.median_sparse_crossing
    at = res.median_sparse_success_at_crossing
    ok = shaped < sparse and at < res.threshold and secs < 1800
    record(9, ok, f"median episodes to {res.threshold:.0%}: diffacc {shaped:g} vs sparse {sparse:g}, "
                  f"sparse success at crossing {at:.3f}, {secs:.0f}s")


@pytest.mark.slow
def test_c10_third_turn(efficiency):
    res, _ = efficiency
    gap = res.third_turn_gap
    record(10, gap >= 0.1, f"third-turn calibrated accuracy gap {gap:.3f}")


@pytest.mark.slow
def test_c11_personalization():
    rec = personalization_study(bundled_config("style_difflogacc"), bundled_config("style_sparse"), SEEDS)
    gain, drop = rec["personalization_gain"], rec["extrinsic_drop"]
    record(11, gain >= 0.2 and drop <= 0.05, f"personalization gain {gain:.3f}, extrinsic drop {drop:.3%}")


@pytest.mark.slow
def test_c12_reward_hacking():
    seeds = range(5)
    acc = reward_hacking_probe(bundled_config("hacking_acc"), bundled_config("hacking_diffacc"), seeds)
    ent = reward_hacking_probe(bundled_config("hacking_ent"), bundled_config("hacking_diffent"), seeds)
    la, lda = acc["mean_episode_length"]["non_potential"], acc["mean_episode_length"]["potential"]
    le, lde = ent["mean_episode_length"]["non_potential"], ent["mean_episode_length"]["potential"]
    record(12, la > lda and le > lde,
           f"median length acc {la:.2f} > diffacc {lda:.2f}, ent {le:.2f} > diffent {lde:.2f}")


def test_c13_bandits():
    t = time.perf_counter()
    inst = bd.BanditInstance(10, 3, 2, frozenset({0, 1}), noise_sigma=0.5)
    rec = bd.compare_sample_complexity(inst, 0.05, 200, seed=13)
    secs = time.perf_counter() - t
    semi, full = rec[bd.SEMI], rec[bd.FULL]
    ok = (semi["success_rate"] >= 0.95 and full["success_rate"] >= 0.95
          and semi["episodes_quartiles"][1] < full["episodes_quartiles"][1] and secs < 300)
    record(13, ok, f"success semi {semi['success_rate']:.3f} full {full['success_rate']:.3f}, "
                   f"median episodes semi {semi['episodes_quartiles'][1]:g} full {full['episodes_quartiles'][1]:g}, "
                   f"{secs:.0f}s")


SMALL = {
    "seed": 11,
    "env": {"name": "exercise", "horizon": 6},
    "shaping": "diffacc",
    "trainer": {"horizon": 6, "batch_size": 8, "total_steps": 64, "eval_every": 32, "eval_episodes": 20,
                "alpha_int": 5.0, "alpha_ext": 3.0},
    "corpus": {"size": 60, "split": [40, 20]},
}


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c14_determinism(tmp_path):
    cfg = tmp_path / "small.yaml"
    cfg.write_text(yaml.safe_dump(SMALL))
    traj = tmp_path / "shared" / "t.jsonl"
    traj.parent.mkdir()
    run_subcommand(["eval", "--agent", "scripted", "--config", str(cfg), "--episodes", "10",
                    "--trajectories", str(traj)], io.StringIO())

    def jobs(d):
        return {
            "train": ["train", "--config", str(cfg), "--out", str(d / "run")],
            "eval": ["eval", "--checkpoint", str(d / "run" / "checkpoint.json"), "--episodes", "20",
                     "--trajectories", str(d / "traj.jsonl")],
            "verify-pbrs": ["verify-pbrs", "--instance", "toy", "--toy-seed", "4", "--gamma", "0.9", "1.0"],
            "bandit": ["bandit", "--trials", "5", "--seed", "3"],
            "gen-profiles": ["gen-profiles", "--n", "50", "--split", "40,10", "--seed", "9",
                             "--out", str(d / "profiles.jsonl")],
            "replay": ["replay", "--trajectory", str(traj)],
            "study": ["study", "--name", "hacking-acc", "--seeds", "1"],
        }

    outputs = {}
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        for sub, argv in jobs(d).items():
            buf = io.StringIO()
            code = run_subcommand(argv, buf)
            assert code == 0, (sub, code)
            outputs[name, sub] = buf.getvalue().replace(str(d), "<dir>")
        outputs[name, "files"] = _files(d)
    differing = [sub for sub in list(jobs(tmp_path)) + ["files"] if outputs["a", sub] != outputs["b", sub]]
    record(14, not differing, f"{len(jobs(tmp_path))} subcommands re-run, differing outputs: {differing or 'none'}")
