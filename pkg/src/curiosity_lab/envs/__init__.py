"""Concrete conversational environments."""

from __future__ import annotations

from typing import Any, Mapping

from curiosity_lab.core import EnvironmentSpec
from curiosity_lab.envs.exercise import ExerciseEnv, ExerciseEnvConfig
from curiosity_lab.envs.style import StyleEnv, StyleEnvConfig
from curiosity_lab.envs.toy import ToyPOMDP
from curiosity_lab.errors import ConfigError


def exercise_config_from(rec: Mapping[str, Any]) -> ExerciseEnvConfig:
    rec = dict(rec)
    if "askable" in rec:
        rec["askable"] = tuple(rec["askable"])
    if "priors" in rec:
        merged = dict(ExerciseEnvConfig().priors)
        merged.update(rec["priors"])
        rec["priors"] = merged
    try:
        return ExerciseEnvConfig(**rec)
    except TypeError as exc:
        raise ConfigError(f"bad exercise env config: {exc}") from None


def style_config_from(rec: Mapping[str, Any]) -> StyleEnvConfig:
    try:
        return StyleEnvConfig(**dict(rec))
    except TypeError as exc:
        raise ConfigError(f"bad style env config: {exc}") from None


def make_env(desc: Mapping[str, Any]) -> EnvironmentSpec:
    """Rebuild an environment from its ``describe()`` record."""
    name = desc.get("name")
    if name == "exercise":
        return ExerciseEnv(exercise_config_from(desc.get("config", {})))
    if name == "style":
        return StyleEnv(style_config_from(desc.get("config", {})))
    if name == "toy":
        return ToyPOMDP(
            tuple(tuple(tuple(r) for r in rows) for rows in desc["likelihoods"]),
            tuple(tuple(r) for r in desc["rewards"]),
            int(desc["horizon"]),
        )
    raise ConfigError(f"unknown environment {name!r}")


__all__ = ["ExerciseEnv", "ExerciseEnvConfig", "StyleEnv", "StyleEnvConfig", "ToyPOMDP", "make_env"]
