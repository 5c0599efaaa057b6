"""Held-out evaluation of a policy: success, calibrated third-turn accuracy, question usage."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

from curiosity_lab.core import (
    ActionKind,
    BeliefEngine,
    EnvironmentSpec,
    IntrinsicFn,
    Policy,
    Trajectory,
    derive_seed,
    rollout,
)
from curiosity_lab.envs import style as st

PROBE_TURN = 3


@dataclass
class EvalReport:
    episodes: int
    success_rate: float
    mean_extrinsic: float
    third_turn_calibrated_accuracy: float
    personalization_score: float | None
    question_histogram: list[int]
    mean_episode_length: float
    mean_intrinsic: float = 0.0
    confusion: list[list[int]] = field(default_factory=list)

    def to_record(self) -> dict:
        return asdict(self)


def ask_actions(env: EnvironmentSpec) -> list[int]:
    return [a for a in range(env.num_actions) if env.action_kind(a) is ActionKind.ASK]


def episode_success(env: EnvironmentSpec, traj: Trajectory) -> bool:
    """Exercise: correct recommendation. Other environments: any positive extrinsic reward."""
    return traj.extrinsic > 0.0


def calibrated_accuracy(engine: BeliefEngine, traj: Trajectory, num_types: int, turn: int = PROBE_TURN) -> float:
    """b_turn(u*) - 1/|U| from the engine applied to the conversation cut at ``turn``."""
    b = engine.predict(traj.final_obs.truncate(turn))
    return b[traj.user_type] - 1.0 / num_types


def evaluation_seeds(seed: int, episodes: int) -> list[int]:
    return [derive_seed(seed, i) for i in range(episodes)]


def summarize(env: EnvironmentSpec, engine: BeliefEngine, trajs: Sequence[Trajectory]) -> EvalReport:
    n = len(trajs)
    if n == 0:
        raise ValueError("need at least one episode")
    asks = ask_actions(env)
    slot = {a: i for i, a in enumerate(asks)}
    hist = [0] * len(asks)
    succ = 0
    ext = 0.0
    r_int = 0.0
    third = 0.0
    length = 0
    pers = 0.0
    is_style = env.name == "style"
    types = env.num_types
    confusion = [[0] * types for _ in range(types)] if env.name == "exercise" else []
    for traj in trajs:
        succ += episode_success(env, traj)
        ext += traj.extrinsic
        length += len(traj.turns)
        third += calibrated_accuracy(engine, traj, types)
        for t in traj.turns:
            r_int += t.r_int
            i = slot.get(t.action)
            if i is not None:
                hist[i] += 1
        if is_style:
            pers += st.personalization_score(traj, traj.user_type)
        if confusion and traj.turns:
            last = traj.turns[-1].action
            base = getattr(env, "recommend_base")
            if last >= base:
                confusion[traj.user_type][last - base] += 1
    return EvalReport(
        episodes=n,
        success_rate=succ / n,
        mean_extrinsic=ext / n,
        third_turn_calibrated_accuracy=third / n,
        personalization_score=pers / n if is_style else None,
        question_histogram=hist,
        mean_episode_length=length / n,
        mean_intrinsic=r_int / n,
        confusion=confusion,
    )


def run_episodes(
    policy: Policy,
    env: EnvironmentSpec,
    users: Sequence[Any],
    episodes: int,
    seed: int,
    engine: BeliefEngine,
    intrinsic: IntrinsicFn | None = None,
) -> list[Trajectory]:
    """Episode i plays ``users[i % len(users)]`` under seed ``derive_seed(seed, i)``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if not users:
        raise ValueError("no users to evaluate on")
    return [
        rollout(env, policy, engine, users[i % len(users)], s, intrinsic)
        for i, s in enumerate(evaluation_seeds(seed, episodes))
    ]


def evaluate(
    policy: Policy,
    env: EnvironmentSpec,
    users: Sequence[Any],
    episodes: int,
    seed: int,
    engine: BeliefEngine,
    intrinsic: IntrinsicFn | None = None,
) -> EvalReport:
    trajs = run_episodes(policy, env, users, episodes, seed, engine, intrinsic)
    return summarize(env, engine, trajs)
