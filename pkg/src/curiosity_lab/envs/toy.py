"""Small random POMDPs with history-independent likelihoods, for exact checks."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from curiosity_lab.core import ActionKind, EnvironmentSpec, Observation, Trajectory


@dataclass(frozen=True)
class ToyPOMDP(EnvironmentSpec):
    """``likelihoods[a][u][o]`` and per-step ``rewards[a][u]``; every action valid every turn."""

    likelihoods: tuple[tuple[tuple[float, ...], ...], ...]
    rewards: tuple[tuple[float, ...], ...]
    horizon: int = 2
    labels: tuple[str, ...] = ()
    name: str = "toy"

    def __post_init__(self) -> None:
        for rows in self.likelihoods:
            for row in rows:
                if abs(sum(row) - 1.0) > 1e-9:
                    raise ValueError("likelihood rows must sum to 1")

    @property
    def num_actions(self) -> int:
        return len(self.likelihoods)

    @property
    def num_responses(self) -> int:
        return len(self.likelihoods[0][0])

    @property
    def type_labels(self) -> tuple[str, ...]:
        return self.labels or tuple(f"type{u}" for u in range(len(self.likelihoods[0])))

    def action_kind(self, action: int) -> ActionKind:
        return ActionKind.ACT

    def valid_actions(self, obs: Observation) -> tuple[int, ...]:
        return tuple(range(self.num_actions))

    def sample_response(self, obs: Observation, action: int, user: int, rng: random.Random) -> int:
        row = self.likelihoods[action][user]
        u = rng.random()
        acc = 0.0
        for o, p in enumerate(row):
            acc += p
            if u < acc:
                return o
        return len(row) - 1

    def response_support(self, obs: Observation, action: int) -> tuple[int, ...]:
        rows = self.likelihoods[action]
        return tuple(o for o in range(self.num_responses) if any(r[o] > 0.0 for r in rows))

    def likelihood(self, obs: Observation, action: int, response: int, type_id: int) -> float:
        return self.likelihoods[action][type_id][response]

    def type_of(self, user: int) -> int:
        return int(user)

    def type_reward(self, obs: Observation, action: int, type_id: int) -> float:
        return self.rewards[action][type_id]

    def extrinsic_reward(self, trajectory: Trajectory) -> float:
        return sum(self.rewards[t.action][trajectory.user_type] for t in trajectory.turns)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "likelihoods": [[list(r) for r in rows] for rows in self.likelihoods],
            "rewards": [list(r) for r in self.rewards],
            "horizon": self.horizon,
        }


def random_toy_pomdp(seed: int, num_types: int = 2, num_actions: int = 3, num_responses: int = 2,
                     horizon: int = 3) -> ToyPOMDP:
    rng = np.random.default_rng(seed)
    lik = []
    for _ in range(num_actions):
        rows = []
        for _ in range(num_types):
            p = rng.dirichlet(np.ones(num_responses))
            p = p / p.sum()
            rows.append(tuple(float(x) for x in p[:-1]) + (1.0 - float(p[:-1].sum()),))
        lik.append(tuple(rows))
    rewards = tuple(tuple(float(x) for x in rng.uniform(0.0, 1.0, size=num_types)) for _ in range(num_actions))
    return ToyPOMDP(tuple(lik), rewards, horizon)
