"""``curiosity-lab`` command line.

Exit codes: 0 ok, 1 runtime failure, 2 configuration error, 3 verification failure.
Metric streams are one JSON record per line; reports are indented JSON with
fixed key order, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence, TextIO

import yaml

from curiosity_lab.core import read_trajectories, replay_actions, write_trajectories
from curiosity_lab.envs import make_env
from curiosity_lab.envs.exercise import ExerciseEnv, generate_corpus, write_corpus
from curiosity_lab.errors import ConfigError, CuriosityLabError
from curiosity_lab.evaluation import run_episodes, summarize
from curiosity_lab.harness import experiments
from curiosity_lab.harness.checkpoint import checkpoint_from_record, save_checkpoint
from curiosity_lab.harness.config import ExperimentConfig
from curiosity_lab.harness.scripted import ScriptedAgent
from curiosity_lab.shaping import PotentialKind, ShapingConfig, ShapingKind, make_intrinsic
from curiosity_lab.trainer import Checkpoint, Trainer, history_key
from curiosity_lab.verify import bandits
from curiosity_lab.verify.belief_mdp import TOY_SEEDS, check_pbrs_invariance, reduced_exercise_mdp, toy_mdp

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

log = logging.getLogger("curiosity_lab")


class VerificationFailed(CuriosityLabError):
    pass


def _emit(rec: Any, out: TextIO) -> None:
    out.write(json.dumps(rec, indent=2) + "\n")


def _write_report(rec: Any, path: str | None, out: TextIO) -> None:
    if path:
        Path(path).write_text(json.dumps(rec, indent=2) + "\n")
    _emit(rec, out)


def _load_experiment(path: str | None, seed: int | None) -> ExperimentConfig:
    if path is None:
        cfg = experiments.bundled_config("exercise_diffacc")
    elif not Path(path).exists() and path in experiments.bundled_config_names():
        cfg = experiments.bundled_config(path)
    else:
        cfg = ExperimentConfig.load(path)
    return cfg.with_seed(seed) if seed is not None else cfg


def _key_fn(cfg: ExperimentConfig, env):
    return history_key if cfg.trainer.policy_key == "history" else env.summary_key


# -- subcommands -----------------------------------------------------------


def cmd_train(args: argparse.Namespace, out: TextIO) -> int:
    cfg = _load_experiment(args.config, args.seed)
    out_dir = Path(args.out or cfg.out or "run")
    out_dir.mkdir(parents=True, exist_ok=True)
    env = cfg.build_env()
    engine = cfg.build_engine(env)
    train_users, eval_users = cfg.build_users(env)
    tr = Trainer(env, cfg.trainer, engine, train_users, eval_users)
    record = cfg.to_record()
    record["out"] = None
    (out_dir / "config.yaml").write_text(yaml.safe_dump(record, sort_keys=True))
    last = None
    with open(out_dir / "metrics.jsonl", "w") as fh:
        for m in tr.run():
            line = json.dumps(m.to_record())
            fh.write(line + "\n")
            fh.flush()
            log.info("step %d success %.3f", m.step, m.success_rate)
            last = m
    final = Checkpoint(tr.step, last.mean_extrinsic, tr.policy, tr.value)
    save_checkpoint(out_dir / "checkpoint.json", final, record)
    save_checkpoint(out_dir / "best.json", tr.best, record)
    _emit({"out": str(out_dir), "steps": tr.step, "final": last.to_record(), "best_step": tr.best.step}, out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, out: TextIO) -> int:
    if args.agent == "scripted":
        cfg = _load_experiment(args.config, args.seed)
        env = cfg.build_env()
        if not isinstance(env, ExerciseEnv):
            raise ConfigError("the scripted agent only plays the exercise environment")
        policy = ScriptedAgent(env)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint (or --agent scripted)")
        path = Path(args.checkpoint)
        if not path.exists():
            raise ConfigError(f"checkpoint {path} does not exist")
        try:
            rec = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse checkpoint {path}: {exc}") from None
        if not isinstance(rec, dict) or "experiment" not in rec:
            raise ConfigError("not a checkpoint file")
        cfg = ExperimentConfig.from_mapping(rec["experiment"])
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        env = cfg.build_env()
        ckpt, _ = checkpoint_from_record(rec, _key_fn(cfg, env))
        policy = ckpt.policy.greedy if args.greedy else ckpt.policy.act
    engine = cfg.build_engine(env)
    train_users, eval_users = cfg.build_users(env)
    users = {"train": train_users, "eval": eval_users}.get(args.split)
    if users is None:
        raise ConfigError(f"unknown split {args.split!r}")
    shaping = cfg.trainer.shaping
    intrinsic = None
    if shaping is not None:
        intrinsic = make_intrinsic(shaping, ShapingConfig(cfg.trainer.gamma, cfg.trainer.prob_floor, env.num_types))
    trajs = run_episodes(policy, env, users, args.episodes, cfg.seed, engine, intrinsic)
    report = summarize(env, engine, trajs).to_record()
    if args.trajectories:
        with open(args.trajectories, "w") as fh:
            write_trajectories(fh, env, trajs, {"experiment": cfg.to_record()})
    _write_report(report, args.report, out)
    return EXIT_OK


def cmd_verify_pbrs(args: argparse.Namespace, out: TextIO) -> int:
    potentials = list(PotentialKind) if args.potential == "all" else [PotentialKind(args.potential)]
    injected = ShapingKind(args.inject) if args.inject else None
    if args.instance == "reduced-exercise":
        instances = [("reduced-exercise", reduced_exercise_mdp())]
    elif args.instance == "toy":
        seeds = TOY_SEEDS if args.toy_seed is None else (args.toy_seed,)
        instances = [(f"toy-{s}", toy_mdp(s)) for s in seeds]
    else:
        raise ConfigError(f"unknown instance {args.instance!r}")
    results = []
    failed = False
    for name, mdp in instances:
        for gamma in args.gamma:
            if injected is not None:
                runs = [(None, check_pbrs_invariance(mdp, None, gamma, args.prob_floor, args.terminal,
                                                     injected, args.weight))]
            else:
                runs = [(k, check_pbrs_invariance(mdp, k, gamma, args.prob_floor, args.terminal))
                        for k in potentials]
            for k, rep in runs:
                rec = {"instance": name, "gamma": gamma, "terminal": args.terminal,
                       "potential": k.value if k else None,
                       "injected": injected.value if injected else None, **rep.to_record()}
                results.append(rec)
                if injected is None and not rep.argmax_sets_equal:
                    failed = True
    summary = {"checks": len(results), "all_invariant": all(r["argmax_sets_equal"] for r in results),
               "results": results}
    _write_report(summary, args.report, out)
    if failed:
        raise VerificationFailed("potential-based shaping changed an optimal action set")
    return EXIT_OK


def cmd_bandit(args: argparse.Namespace, out: TextIO) -> int:
    inst = bandits.BanditInstance(args.K, args.k, args.m, tuple(range(args.m)), args.kind, args.sigma)
    cfg = bandits.StrategyConfig(max_episodes=args.max_episodes)
    rec = bandits.compare_sample_complexity(inst, args.delta, args.trials, args.seed, cfg)
    _write_report(rec, args.report, out)
    return EXIT_OK


def _parse_split(text: str) -> list[int]:
    try:
        parts = [int(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad split {text!r}") from None
    if len(parts) != 2 or min(parts) < 0:
        raise ConfigError("split must be two non-negative counts, e.g. 800,200")
    return parts


def cmd_gen_profiles(args: argparse.Namespace, out: TextIO) -> int:
    split = _parse_split(args.split)
    corpus = generate_corpus(args.n, split, args.seed, args.distractors, args.distractor_values)
    if args.out:
        with open(args.out, "w") as fh:
            write_corpus(fh, corpus)
    else:
        write_corpus(out, corpus)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, out: TextIO) -> int:
    path = Path(args.trajectory)
    if not path.exists():
        raise ConfigError(f"trajectory file {path} does not exist")
    with open(path) as fh:
        records = read_trajectories(fh)
    mismatches = []
    for i, st in enumerate(records):
        meta = st.header.get("meta") or {}
        env = make_env(st.header["env"])
        if "experiment" in meta:
            cfg = ExperimentConfig.from_mapping(meta["experiment"])
        else:
            cfg = ExperimentConfig.from_mapping({"seed": 0, "env": {"name": env.name, **st.header["env"]["config"]}})
        engine = cfg.build_engine(env)
        intrinsic = None
        if cfg.trainer.shaping is not None:
            intrinsic = make_intrinsic(cfg.trainer.shaping,
                                       ShapingConfig(cfg.trainer.gamma, cfg.trainer.prob_floor, env.num_types))
        user = env.user_from_record(st.header["user"])
        try:
            again = replay_actions(env, [t.action for t in st.turns], engine, user, st.header["seed"], intrinsic)
        except CuriosityLabError as exc:
            mismatches.append({"trajectory": i, "turn": None, "reason": str(exc)})
            continue
        if len(again.turns) != len(st.turns):
            mismatches.append({"trajectory": i, "turn": None, "reason": "length differs"})
            continue
        for t, (old, new) in enumerate(zip(st.turns, again.turns)):
            for name in ("response", "obs_after", "belief_before", "belief_after", "r_ext", "r_int"):
                if getattr(old, name) != getattr(new, name):
                    mismatches.append({"trajectory": i, "turn": t, "reason": f"{name} differs"})
                    break
    rep = {"trajectories": len(records), "turns": sum(len(r.turns) for r in records),
           "mismatches": mismatches, "ok": not mismatches}
    _emit(rep, out)
    if mismatches:
        raise VerificationFailed(f"{len(mismatches)} replay mismatches")
    return EXIT_OK


_STUDIES = {
    "sample-efficiency": ("exercise_diffacc", "exercise_sparse"),
    "personalization": ("style_difflogacc", "style_sparse"),
    "hacking-acc": ("hacking_acc", "hacking_diffacc"),
    "hacking-ent": ("hacking_ent", "hacking_diffent"),
}


def cmd_study(args: argparse.Namespace, out: TextIO) -> int:
    first, second = (experiments.bundled_config(n) for n in _STUDIES[args.name])
    seeds = range(args.seeds)
    if args.name == "sample-efficiency":
        rec = experiments.sample_efficiency_study(first, second, seeds, args.threshold).to_record()
    elif args.name == "personalization":
        rec = experiments.personalization_study(first, second, seeds)
    else:
        rec = experiments.reward_hacking_probe(first, second, seeds)
    rec = {"study": args.name, **rec}
    _write_report(rec, args.report, out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curiosity-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy from an experiment config")
    t.add_argument("--config", help="YAML file or bundled config name")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", help="output directory")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint or the scripted agent")
    e.add_argument("--checkpoint")
    e.add_argument("--agent", choices=("policy", "scripted"), default="policy")
    e.add_argument("--config", help="experiment config for --agent scripted")
    e.add_argument("--split", default="eval")
    e.add_argument("--episodes", type=int, default=200)
    e.add_argument("--seed", type=int)
    e.add_argument("--greedy", action="store_true", help="act greedily instead of sampling")
    e.add_argument("--trajectories", help="write trajectories (JSON lines) here")
    e.add_argument("--report", help="also write the report here")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify-pbrs", help="exhaustive optimal-action-set comparison")
    v.add_argument("--instance", default="reduced-exercise", choices=("reduced-exercise", "toy"))
    v.add_argument("--toy-seed", type=int)
    v.add_argument("--potential", default="all", choices=[k.value for k in PotentialKind] + ["all"])
    v.add_argument("--gamma", type=float, nargs="+", default=[0.95])
    v.add_argument("--terminal", default="zero", choices=("zero", "keep"))
    v.add_argument("--inject", choices=[k.value for k in ShapingKind],
                   help="add a raw intrinsic reward instead of a potential")
    v.add_argument("--weight", type=float, default=1.0)
    v.add_argument("--prob-floor", type=float, default=1e-6)
    v.add_argument("--report")
    v.set_defaults(func=cmd_verify_pbrs)

    b = sub.add_parser("bandit", help="semi- vs full-bandit sample complexity")
    b.add_argument("--K", type=int, default=10)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--m", type=int, default=2)
    b.add_argument("--sigma", type=float, default=0.5)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--trials", type=int, default=200)
    b.add_argument("--kind", default=bandits.ADDITIVE, choices=(bandits.ADDITIVE, bandits.CONJUNCTIVE))
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--max-episodes", type=int, default=1_000_000)
    b.add_argument("--report")
    b.set_defaults(func=cmd_bandit)

    g = sub.add_parser("gen-profiles", help="sample a user-profile corpus")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--split", default="800,200")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--distractors", type=int, default=15)
    g.add_argument("--distractor-values", type=int, default=4)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_profiles)

    r = sub.add_parser("replay", help="re-execute trajectories and re-derive beliefs")
    r.add_argument("--trajectory", required=True)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("study", help="multi-seed comparison on the bundled configs")
    s.add_argument("--name", required=True, choices=sorted(_STUDIES))
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--threshold", type=float, default=0.9)
    s.add_argument("--report")
    s.set_defaults(func=cmd_study)
    return p


def run_subcommand(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args, out)
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CuriosityLabError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
