"""User-conditioned POMDP machinery: beliefs, observations, environments, rollouts.

A conversation is a sequence of (agent action, user response) exchanges. The
latent user is fixed for the episode; the agent tracks a belief over the
finite user-type space and updates it after every user response.
"""

from __future__ import annotations

import abc
import enum
import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, NamedTuple, Protocol, Sequence, TextIO

from curiosity_lab import kernels
from curiosity_lab.errors import PolicyActionOutOfRange, ZeroEvidence

Belief = tuple[float, ...]

AGENT = 0
USER = 1

BELIEF_TOL = 1e-9


class ActionKind(str, enum.Enum):
    ASK = "ask"
    ACT = "act"
    RECOMMEND = "recommend"


@dataclass(frozen=True)
class UserType:
    id: int
    label: str


@dataclass(frozen=True)
class AgentAction:
    id: int
    kind: ActionKind


class Observation(NamedTuple):
    """Conversation so far: append-only (actor, event-id) pairs."""

    events: tuple[tuple[int, int], ...] = ()
    turn: int = 0

    def extend(self, action: int, response: int) -> Observation:
        return Observation(self.events + ((AGENT, action), (USER, response)), self.turn + 1)

    def exchanges(self) -> Iterator[tuple[int, int]]:
        ev = self.events
        for i in range(0, len(ev), 2):
            yield ev[i][1], ev[i + 1][1]

    def last_action(self) -> int | None:
        return self.events[-2][1] if self.events else None

    def truncate(self, turns: int) -> Observation:
        turns = min(turns, self.turn)
        return Observation(self.events[: 2 * turns], turns)


@dataclass(frozen=True)
class ExtendedState:
    obs: Observation
    user: UserType


# -- belief arithmetic -----------------------------------------------------


def is_normalized(b: Sequence[float], tol: float = BELIEF_TOL) -> bool:
    return all(p >= 0.0 for p in b) and abs(sum(b) - 1.0) <= tol


def uniform_belief(n: int) -> Belief:
    return tuple([1.0 / n] * n)


def one_hot(n: int, i: int) -> Belief:
    out = [0.0] * n
    out[i] = 1.0
    return tuple(out)


def belief_update(b: Sequence[float], likelihoods: Sequence[float]) -> Belief:
    """Bayes rule: posterior(u) proportional to likelihood(u) * b(u).

    Raises ZeroEvidence when the response is impossible under every type
    that has positive prior mass.
    """
    if any(x < 0.0 for x in likelihoods):
        raise ValueError("likelihoods must be nonnegative")
    return kernels.belief_update(b, likelihoods)


def expected_reward(b: Sequence[float], per_type_rewards: Sequence[float]) -> float:
    """Belief-weighted reward, sum_u b(u) R(s, a | u)."""
    if len(b) != len(per_type_rewards):
        raise ValueError("belief and reward vectors differ in length")
    return kernels.dot(b, per_type_rewards)


# -- environments ----------------------------------------------------------


class EnvironmentSpec(abc.ABC):
    """A finite-alphabet conversational POMDP conditioned on a latent user.

    ``user`` is the environment's latent user object (a profile, or a type id);
    ``type_of`` maps it into the type space the belief is defined over.
    Likelihoods may condition on the full observation history.
    """

    name: str = "env"
    horizon: int
    variable_length: bool = False

    @property
    @abc.abstractmethod
    def num_actions(self) -> int: ...

    @property
    @abc.abstractmethod
    def type_labels(self) -> tuple[str, ...]: ...

    @property
    def num_types(self) -> int:
        return len(self.type_labels)

    def user_types(self) -> tuple[UserType, ...]:
        return tuple(UserType(i, label) for i, label in enumerate(self.type_labels))

    @abc.abstractmethod
    def action_kind(self, action: int) -> ActionKind: ...

    def action(self, action: int) -> AgentAction:
        return AgentAction(action, self.action_kind(action))

    def initial_observation(self) -> Observation:
        return Observation()

    @abc.abstractmethod
    def valid_actions(self, obs: Observation) -> tuple[int, ...]: ...

    def is_terminal(self, obs: Observation) -> bool:
        return obs.turn >= self.horizon

    @abc.abstractmethod
    def sample_response(self, obs: Observation, action: int, user: Any, rng: random.Random) -> int: ...

    def step(self, obs: Observation, action: int, user: Any, rng: random.Random) -> tuple[int, Observation]:
        self.check_action(obs, action)
        response = self.sample_response(obs, action, user, rng)
        return response, obs.extend(action, response)

    def check_action(self, obs: Observation, action: int) -> None:
        if not 0 <= action < self.num_actions:
            raise PolicyActionOutOfRange(f"action {action} outside alphabet of size {self.num_actions}")

    @abc.abstractmethod
    def response_support(self, obs: Observation, action: int) -> tuple[int, ...]:
        """Every response with nonzero likelihood under at least one type."""

    @abc.abstractmethod
    def likelihood(self, obs: Observation, action: int, response: int, type_id: int) -> float: ...

    def likelihood_vector(self, obs: Observation, action: int, response: int) -> tuple[float, ...]:
        return tuple(self.likelihood(obs, action, response, u) for u in range(self.num_types))

    @abc.abstractmethod
    def type_of(self, user: Any) -> int: ...

    @abc.abstractmethod
    def type_reward(self, obs: Observation, action: int, type_id: int) -> float:
        """Per-step extrinsic reward R(s, a | u) used for belief-MDP solves."""

    @abc.abstractmethod
    def extrinsic_reward(self, trajectory: Trajectory) -> float:
        """Episode-level extrinsic reward, credited on the final turn."""

    def summary_key(self, obs: Observation) -> Any:
        """Compact observation key for tabular policies; the full history by default."""
        return obs.events

    def user_to_record(self, user: Any) -> Any:
        return user

    def user_from_record(self, record: Any) -> Any:
        return record

    def describe(self) -> dict:
        return {"name": self.name}


class BeliefEngine(Protocol):
    def prior(self) -> Belief: ...

    def predict(self, obs: Observation) -> Belief: ...

    def update(
        self, belief: Belief, obs_before: Observation, action: int, response: int, obs_after: Observation
    ) -> Belief: ...


# -- trajectories ----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TurnRecord:
    obs_before: Observation
    action: int
    response: int
    obs_after: Observation
    belief_before: Belief
    belief_after: Belief
    r_ext: float
    r_int: float


@dataclass(frozen=True)
class Trajectory:
    turns: tuple[TurnRecord, ...]
    user: Any
    user_type: int
    seed: int
    extrinsic: float = 0.0

    def __len__(self) -> int:
        return len(self.turns)

    @property
    def final_obs(self) -> Observation:
        return self.turns[-1].obs_after if self.turns else Observation()

    @property
    def actions(self) -> tuple[int, ...]:
        return tuple(t.action for t in self.turns)

    def beliefs(self) -> list[Belief]:
        """b_0 .. b_T along the episode."""
        if not self.turns:
            return []
        return [self.turns[0].belief_before] + [t.belief_after for t in self.turns]


Policy = Callable[[Observation, tuple[int, ...], random.Random], int]
IntrinsicFn = Callable[[Belief, Belief, int], float]


def derive_seed(master: int, index: int) -> int:
    """Stable 64-bit seed for stream ``index`` under ``master``."""
    digest = hashlib.blake2b(f"{master}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def episode_streams(seed: int) -> tuple[random.Random, random.Random]:
    """Independent (environment, policy) random streams for one episode."""
    return random.Random(2 * seed), random.Random(2 * seed + 1)


def rollout(
    env: EnvironmentSpec,
    policy: Policy,
    engine: BeliefEngine,
    user: Any,
    seed: int,
    intrinsic: IntrinsicFn | None = None,
) -> Trajectory:
    """Run one episode; beliefs are recomputed after each user response.

    ``intrinsic(b_before, b_after, true_type)`` fills ``r_int`` when given.
    The extrinsic reward is credited on the final turn only.
    """
    if env.horizon < 1:
        raise ValueError("horizon must be >= 1")
    env_rng, pol_rng = episode_streams(seed)
    u_star = env.type_of(user)
    obs = env.initial_observation()
    belief = engine.prior()
    pending: list[tuple] = []
    while not env.is_terminal(obs):
        valid = env.valid_actions(obs)
        action = policy(obs, valid, pol_rng)
        if action not in valid:
            raise PolicyActionOutOfRange(f"policy chose {action}; valid actions are {valid}")
        response, nxt = env.step(obs, action, user, env_rng)
        b_after = engine.update(belief, obs, action, response, nxt)
        r_int = intrinsic(belief, b_after, u_star) if intrinsic is not None else 0.0
        pending.append((obs, action, response, nxt, belief, b_after, r_int))
        obs, belief = nxt, b_after
    return _finish(env, pending, user, u_star, seed)


def _finish(env: EnvironmentSpec, pending: list[tuple], user: Any, u_star: int, seed: int) -> Trajectory:
    draft = Trajectory(
        tuple(TurnRecord(o, a, r, n, bb, ba, 0.0, ri) for (o, a, r, n, bb, ba, ri) in pending),
        user,
        u_star,
        seed,
    )
    ext = env.extrinsic_reward(draft) if pending else 0.0
    turns = list(draft.turns)
    if turns:
        last = turns[-1]
        turns[-1] = TurnRecord(
            last.obs_before, last.action, last.response, last.obs_after,
            last.belief_before, last.belief_after, ext, last.r_int,
        )
    return Trajectory(tuple(turns), user, u_star, seed, ext)


def replay_actions(
    env: EnvironmentSpec,
    actions: Sequence[int],
    engine: BeliefEngine,
    user: Any,
    seed: int,
    intrinsic: IntrinsicFn | None = None,
) -> Trajectory:
    """Re-execute a recorded action sequence with the original environment stream."""
    it = iter(actions)

    def scripted(obs: Observation, valid: tuple[int, ...], rng: random.Random) -> int:
        try:
            return next(it)
        except StopIteration:
            raise PolicyActionOutOfRange("recorded trajectory ended before the episode did") from None

    return rollout(env, scripted, engine, user, seed, intrinsic)


# -- serialization ---------------------------------------------------------


def _obs_record(obs: Observation) -> dict:
    return {"turn": obs.turn, "events": [list(e) for e in obs.events]}


def _obs_from_record(rec: dict) -> Observation:
    return Observation(tuple((int(a), int(e)) for a, e in rec["events"]), int(rec["turn"]))


def turn_to_record(t: TurnRecord) -> dict:
    return {
        "obs_before": _obs_record(t.obs_before),
        "action": t.action,
        "response": t.response,
        "obs_after": _obs_record(t.obs_after),
        "belief_before": list(t.belief_before),
        "belief_after": list(t.belief_after),
        "r_ext": t.r_ext,
        "r_int": t.r_int,
    }


def turn_from_record(rec: dict) -> TurnRecord:
    return TurnRecord(
        _obs_from_record(rec["obs_before"]),
        int(rec["action"]),
        int(rec["response"]),
        _obs_from_record(rec["obs_after"]),
        tuple(float(x) for x in rec["belief_before"]),
        tuple(float(x) for x in rec["belief_after"]),
        float(rec["r_ext"]),
        float(rec["r_int"]),
    )


def write_trajectories(
    fh: TextIO, env: EnvironmentSpec, trajectories: Iterable[Trajectory], meta: dict | None = None
) -> None:
    """Line-delimited records: one header per trajectory, then one line per turn."""
    for traj in trajectories:
        header = {
            "record": "trajectory",
            "env": env.describe(),
            "user": env.user_to_record(traj.user),
            "user_type": traj.user_type,
            "seed": traj.seed,
            "extrinsic": traj.extrinsic,
            "num_turns": len(traj.turns),
        }
        if meta:
            header["meta"] = meta
        fh.write(json.dumps(header) + "\n")
        for t in traj.turns:
            fh.write(json.dumps({"record": "turn", **turn_to_record(t)}) + "\n")


@dataclass
class SerializedTrajectory:
    header: dict
    turns: list[TurnRecord] = field(default_factory=list)


def read_trajectories(fh: TextIO) -> list[SerializedTrajectory]:
    out: list[SerializedTrajectory] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        kind = rec.pop("record", None)
        if kind == "trajectory":
            out.append(SerializedTrajectory(rec))
        elif kind == "turn":
            if not out:
                raise ValueError("turn record before any trajectory header")
            out[-1].turns.append(turn_from_record(rec))
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    return out
