"""Experiment configuration (YAML) and the objects it builds."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from curiosity_lab.core import BeliefEngine, EnvironmentSpec
from curiosity_lab.envs import exercise_config_from, make_env, style_config_from
from curiosity_lab.envs import exercise as ex
from curiosity_lab.envs.exercise import ExerciseEnv, generate_corpus
from curiosity_lab.envs.style import StyleEnv
from curiosity_lab.errors import ConfigError
from curiosity_lab.trainer import TrainerConfig
from curiosity_lab.user_model import (
    AttributePriors,
    ExactBayesEngine,
    StrategyClassifierEngine,
    StyleClassifierEngine,
)

_TOP_KEYS = {"env", "trainer", "shaping", "user_model", "corpus", "seed", "out"}


@dataclass
class ExperimentConfig:
    env: dict = field(default_factory=lambda: {"name": "exercise"})
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    user_model: dict = field(default_factory=dict)
    # corpus "seed" is optional; without it the corpus follows the master seed
    corpus: dict = field(default_factory=lambda: {"size": 1000, "split": [800, 200]})
    seed: int = 0
    out: str | None = None

    # -- construction --

    @classmethod
    def from_mapping(cls, rec: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
        if not isinstance(rec, Mapping):
            raise ConfigError("experiment config must be a mapping")
        unknown = set(rec) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "seed" not in rec:
            raise ConfigError("config must set a master seed")
        env = dict(rec.get("env") or {"name": "exercise"})
        if env.get("name") not in ("exercise", "style"):
            raise ConfigError(f"unknown environment {env.get('name')!r}")
        trainer_rec = dict(rec.get("trainer") or {})
        if "shaping" in rec:
            trainer_rec["shaping"] = rec["shaping"]
        seed = rec["seed"]
        if not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        trainer_rec.setdefault("seed", seed)
        trainer = TrainerConfig.from_record(trainer_rec)
        corpus = {"size": 1000, "split": [800, 200]}
        corpus.update(rec.get("corpus") or {})
        if "file" in corpus and base_dir is not None:
            path = (base_dir / corpus["file"]).resolve()
            if not path.exists():
                raise ConfigError(f"corpus file {path} does not exist")
            corpus["file"] = str(path)
        cfg = cls(env, trainer, dict(rec.get("user_model") or {}), corpus, seed, rec.get("out"))
        cfg.build_env()  # validate early
        cfg.build_engine(cfg.build_env())
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            rec = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_mapping(rec or {}, path.parent)

    def with_seed(self, seed: int) -> ExperimentConfig:
        rec = self.to_record()
        rec["seed"] = seed
        rec["trainer"]["seed"] = seed
        return ExperimentConfig.from_mapping(rec)

    def to_record(self) -> dict:
        return {
            "env": copy.deepcopy(self.env),
            "trainer": self.trainer.to_record(),
            "user_model": copy.deepcopy(self.user_model),
            "corpus": copy.deepcopy(self.corpus),
            "seed": self.seed,
            "out": self.out,
        }

    # -- builders --

    def build_env(self) -> EnvironmentSpec:
        name = self.env.get("name")
        conf = {k: v for k, v in self.env.items() if k != "name"}
        if name == "exercise":
            return ExerciseEnv(exercise_config_from(conf.get("config", conf)))
        if name == "style":
            return StyleEnv(style_config_from(conf.get("config", conf)))
        return make_env(self.env)

    def priors(self) -> AttributePriors:
        return AttributePriors.from_mapping(self.user_model.get("priors") or {})

    def build_engine(self, env: EnvironmentSpec) -> BeliefEngine:
        um = self.user_model
        kind = um.get("kind", "classifier" if env.name == "exercise" else "style")
        tau = float(um.get("tau", self.trainer.tau))
        if kind == "classifier":
            if not isinstance(env, ExerciseEnv):
                raise ConfigError("the strategy classifier needs the exercise environment")
            return StrategyClassifierEngine(env, self.priors(), tau)
        if kind == "exact":
            if isinstance(env, ExerciseEnv):
                prior = StrategyClassifierEngine(env, self.priors()).prior()
            else:
                prior = tuple([1.0 / env.num_types] * env.num_types)
            return ExactBayesEngine(env, prior, tau)
        if kind == "style":
            return StyleClassifierEngine(
                reliability=float(um.get("reliability", 1.0)),
                teach_evidence=float(um.get("teach_evidence", 0.0)),
                tau=tau,
            )
        raise ConfigError(f"unknown user model {kind!r}")

    def build_users(self, env: EnvironmentSpec) -> tuple[Sequence[Any], Sequence[Any]]:
        """(train users, eval users)."""
        if isinstance(env, ExerciseEnv):
            corpus = self.build_corpus(env)
            return corpus.train, corpus.eval
        types = tuple(range(env.num_types))
        return types, types

    def build_corpus(self, env: ExerciseEnv) -> ex.ProfileCorpus:
        c = self.corpus
        if "file" in c:
            with open(c["file"]) as fh:
                return ex.read_corpus(fh)
        split = [int(x) for x in c.get("split", [800, 200])]
        return generate_corpus(int(c.get("size", sum(split))), split, int(c.get("seed", self.seed)),
                               env.config.num_distractor_questions, env.config.distractor_values)
