"""Multi-seed studies: sample efficiency, third-turn accuracy, personalization, reward hacking."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import yaml

from curiosity_lab.harness.config import ExperimentConfig
from curiosity_lab.trainer import IterationMetrics, Trainer, TrainerConfig, with_overrides


def bundled_config(name: str) -> ExperimentConfig:
    """One of the YAML configs shipped in ``curiosity_lab/configs``."""
    text = resources.files("curiosity_lab").joinpath("configs", f"{name}.yaml").read_text()
    return ExperimentConfig.from_mapping(yaml.safe_load(text))


def bundled_config_names() -> list[str]:
    root = resources.files("curiosity_lab").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def run_config(cfg: ExperimentConfig, trainer_overrides: dict | None = None) -> tuple[list[IterationMetrics], Trainer]:
    env = cfg.build_env()
    engine = cfg.build_engine(env)
    train_users, eval_users = cfg.build_users(env)
    tcfg: TrainerConfig = cfg.trainer
    if trainer_overrides:
        tcfg = with_overrides(tcfg, **trainer_overrides)
    tr = Trainer(env, tcfg, engine, train_users, eval_users)
    return list(tr.run()), tr


def crossing_step(stream: Sequence[IterationMetrics], threshold: float) -> float:
    """First eval step with success >= threshold; inf if never."""
    for m in stream:
        if m.success_rate >= threshold:
            return float(m.step)
    return math.inf


def success_at(stream: Sequence[IterationMetrics], step: float) -> float:
    """Held-out success of the latest eval at or before ``step``."""
    best = stream[0].success_rate
    for m in stream:
        if m.step <= step:
            best = m.success_rate
    return best


def _median(xs: Iterable[float]) -> float:
    return float(statistics.median(list(xs)))


@dataclass
class SampleEfficiencyResult:
    threshold: float
    budget: int
    shaped_crossings: list[float]
    sparse_crossings: list[float]
    sparse_success_at_shaped_crossing: list[float]
    shaped_third_turn: list[float]
    sparse_third_turn: list[float]

    @property
    def median_shaped_crossing(self) -> float:
        return _median(self.shaped_crossings)

    @property
    def median_sparse_crossing(self) -> float:
        return _median(self.sparse_crossings)

    @property
    def median_sparse_success_at_crossing(self) -> float:
        return _median(self.sparse_success_at_shaped_crossing)

    @property
    def third_turn_gap(self) -> float:
        return _median(self.shaped_third_turn) - _median(self.sparse_third_turn)

    def to_record(self) -> dict:
        def fin(x: float) -> float | None:
            return None if math.isinf(x) else x

        return {
            "threshold": self.threshold,
            "budget": self.budget,
            "shaped_crossings": [fin(x) for x in self.shaped_crossings],
            "sparse_crossings": [fin(x) for x in self.sparse_crossings],
            "median_shaped_crossing": fin(self.median_shaped_crossing),
            "median_sparse_crossing": fin(self.median_sparse_crossing),
            "sparse_success_at_shaped_crossing": self.sparse_success_at_shaped_crossing,
            "shaped_third_turn": self.shaped_third_turn,
            "sparse_third_turn": self.sparse_third_turn,
            "third_turn_gap": self.third_turn_gap,
        }


def sample_efficiency_study(
    shaped: ExperimentConfig,
    sparse: ExperimentConfig,
    seeds: Sequence[int],
    threshold: float = 0.9,
) -> SampleEfficiencyResult:
    """Episodes to reach ``threshold`` held-out success, shaped vs sparse, per seed.

    Each run stops at its own crossing or at the episode budget. The sparse
    success at the shaped crossing is read from the sparse run's eval stream;
    a sparse run that stopped earlier had already crossed.
    """
    budget = shaped.trainer.total_steps
    res = SampleEfficiencyResult(threshold, budget, [], [], [], [], [])
    for seed in seeds:
        s_stream, _ = run_config(shaped.with_seed(seed), {"target_success": threshold})
        b_stream, _ = run_config(sparse.with_seed(seed), {"target_success": threshold})
        x = crossing_step(s_stream, threshold)
        res.shaped_crossings.append(x)
        res.sparse_crossings.append(crossing_step(b_stream, threshold))
        res.sparse_success_at_shaped_crossing.append(success_at(b_stream, x if not math.isinf(x) else budget))
        res.shaped_third_turn.append(s_stream[-1].third_turn_calibrated_accuracy)
        res.sparse_third_turn.append(b_stream[-1].third_turn_calibrated_accuracy)
    return res


@dataclass
class PairedFinalResult:
    """Final held-out metrics of two configs trained on the same seeds."""

    names: tuple[str, str]
    first: list[IterationMetrics]
    second: list[IterationMetrics]

    def medians(self, attr: str) -> tuple[float, float]:
        return (_median(getattr(m, attr) for m in self.first), _median(getattr(m, attr) for m in self.second))

    def to_record(self) -> dict:
        out: dict = {"names": list(self.names), "seeds": len(self.first)}
        for attr in ("mean_extrinsic", "success_rate", "mean_episode_length", "third_turn_calibrated_accuracy"):
            a, b = self.medians(attr)
            out[attr] = {self.names[0]: a, self.names[1]: b}
        if self.first and self.first[0].personalization_score is not None:
            a, b = self.medians("personalization_score")
            out["personalization_score"] = {self.names[0]: a, self.names[1]: b}
        return out


def paired_final(first: ExperimentConfig, second: ExperimentConfig, seeds: Sequence[int],
                 names: tuple[str, str] = ("first", "second")) -> PairedFinalResult:
    res = PairedFinalResult(names, [], [])
    for seed in seeds:
        res.first.append(run_config(first.with_seed(seed))[0][-1])
        res.second.append(run_config(second.with_seed(seed))[0][-1])
    return res


def personalization_study(shaped: ExperimentConfig, sparse: ExperimentConfig, seeds: Sequence[int]) -> dict:
    """Personalization gain and relative extrinsic change of shaping over sparse (seed medians)."""
    res = paired_final(shaped, sparse, seeds, ("shaped", "sparse"))
    p_shaped, p_sparse = res.medians("personalization_score")
    e_shaped, e_sparse = res.medians("mean_extrinsic")
    rec = res.to_record()
    rec["personalization_gain"] = p_shaped - p_sparse
    rec["extrinsic_drop"] = (e_sparse - e_shaped) / e_sparse if e_sparse else 0.0
    return rec


def reward_hacking_probe(non_potential: ExperimentConfig, potential: ExperimentConfig, seeds: Sequence[int]) -> dict:
    """Does per-turn non-potential shaping stretch conversations relative to its Diff variant?"""
    res = paired_final(non_potential, potential, seeds, ("non_potential", "potential"))
    rec = res.to_record()
    rec["shaping"] = {
        "non_potential": non_potential.trainer.shaping.value if non_potential.trainer.shaping else None,
        "potential": potential.trainer.shaping.value if potential.trainer.shaping else None,
    }
    rec["variable_length"] = [bool(non_potential.build_env().variable_length),
                              bool(potential.build_env().variable_length)]
    a, b = res.medians("mean_episode_length")
    rec["non_potential_longer"] = a > b
    return rec
