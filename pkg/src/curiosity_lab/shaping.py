"""Belief potentials and the six intrinsic-reward formulas.

All logarithms are natural. ``prob_floor`` clamps b(u*) inside logs and the
old belief inside KL denominators so every reward stays finite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from curiosity_lab import kernels
from curiosity_lab.errors import ConfigError


class PotentialKind(str, enum.Enum):
    ACC = "acc"
    LOGACC = "logacc"
    NEGENT = "negent"


class ShapingKind(str, enum.Enum):
    DIFFACC = "diffacc"
    DIFFLOGACC = "difflogacc"
    DIFFENT = "diffent"
    ACC = "acc"
    ENT = "ent"
    INFOGAIN = "infogain"

    @property
    def potential_based(self) -> bool:
        return self in _DIFF_POTENTIAL

    @property
    def potential(self) -> PotentialKind | None:
        return _DIFF_POTENTIAL.get(self)

    @classmethod
    def parse(cls, name: str) -> ShapingKind:
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown shaping {name!r}; expected one of {valid}") from None


_DIFF_POTENTIAL = {
    ShapingKind.DIFFACC: PotentialKind.ACC,
    ShapingKind.DIFFLOGACC: PotentialKind.LOGACC,
    ShapingKind.DIFFENT: PotentialKind.NEGENT,
}


@dataclass(frozen=True)
class ShapingConfig:
    gamma: float = 0.95
    prob_floor: float = 1e-6
    num_user_types: int = 8

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.num_user_types < 2:
            raise ConfigError("need at least two user types")
        if not 0.0 < self.prob_floor <= 1.0 / self.num_user_types:
            raise ConfigError("prob_floor must lie in (0, 1/|U|]")


def entropy(b: Sequence[float]) -> float:
    """Shannon entropy in nats, with 0 log 0 := 0."""
    return kernels.entropy(b)


def kl_divergence(b_new: Sequence[float], b_old: Sequence[float], prob_floor: float = 1e-6) -> float:
    return kernels.kl_divergence(b_new, b_old, prob_floor)


def potential(kind: PotentialKind, b: Sequence[float], true_type: int, prob_floor: float = 1e-6) -> float:
    if kind is PotentialKind.ACC:
        return b[true_type]
    if kind is PotentialKind.LOGACC:
        return math.log(max(b[true_type], prob_floor))
    if kind is PotentialKind.NEGENT:
        return -kernels.entropy(b)
    raise ValueError(f"unknown potential {kind!r}")


def shaped_reward(
    r_base: float,
    b_before: Sequence[float],
    b_after: Sequence[float],
    kind: PotentialKind,
    true_type: int,
    cfg: ShapingConfig,
) -> float:
    """r_base + gamma * phi(b_after) - phi(b_before)."""
    phi_after = potential(kind, b_after, true_type, cfg.prob_floor)
    phi_before = potential(kind, b_before, true_type, cfg.prob_floor)
    return r_base + (cfg.gamma * phi_after - phi_before)


def intrinsic_reward(
    kind: ShapingKind,
    b_before: Sequence[float],
    b_after: Sequence[float],
    true_type: int,
    cfg: ShapingConfig,
) -> float:
    g = cfg.gamma
    floor = cfg.prob_floor
    if kind is ShapingKind.DIFFACC:
        return g * b_after[true_type] - b_before[true_type]
    if kind is ShapingKind.DIFFLOGACC:
        return g * math.log(max(b_after[true_type], floor)) - math.log(max(b_before[true_type], floor))
    if kind is ShapingKind.DIFFENT:
        return kernels.entropy(b_before) - g * kernels.entropy(b_after)
    if kind is ShapingKind.ACC:
        return b_after[true_type] - 1.0 / cfg.num_user_types
    if kind is ShapingKind.ENT:
        return math.log(cfg.num_user_types) - kernels.entropy(b_after)
    if kind is ShapingKind.INFOGAIN:
        return kernels.kl_divergence(b_after, b_before, floor)
    raise ValueError(f"unknown shaping {kind!r}")


def make_intrinsic(kind: ShapingKind, cfg: ShapingConfig) -> Callable[[Sequence[float], Sequence[float], int], float]:
    """Bind ``kind`` and ``cfg`` into an ``(b_before, b_after, u*) -> reward`` callable."""

    def fn(b_before: Sequence[float], b_after: Sequence[float], true_type: int) -> float:
        return intrinsic_reward(kind, b_before, b_after, true_type, cfg)

    return fn
