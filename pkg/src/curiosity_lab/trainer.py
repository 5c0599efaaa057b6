"""Multi-turn REINFORCE with GAE-propagated rewards, a KL leash and a value table.

Per turn the total reward is

    r_t = alpha_ext * r_ext_t + alpha_int * r_int_t - beta * KL(pi(.|s_t) || pi_ref(.|s_t))

where the KL is taken at the visited state only. Rewards are propagated with

    r_hat_t = r_t + gamma (1 - lambda) V(s_{t+1}) + gamma lambda r_hat_{t+1},   V(s_T) = 0

and the tabular softmax policy climbs mean_batch sum_t r_hat_t * grad log pi(a_t | s_t).
"""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Hashable, Iterator, Mapping, Sequence

from curiosity_lab import kernels
from curiosity_lab.core import BeliefEngine, EnvironmentSpec, Observation, Trajectory, derive_seed, rollout
from curiosity_lab.errors import ConfigError, LengthMismatch
from curiosity_lab.evaluation import EvalReport, run_episodes, summarize
from curiosity_lab.shaping import ShapingConfig, ShapingKind, make_intrinsic

Key = Hashable
KeyFn = Callable[[Observation], Key]


def history_key(obs: Observation) -> Key:
    """The full event history; the turn count is implied by its length."""
    return obs.events


# -- tables ----------------------------------------------------------------


class PolicyTable:
    """Softmax logits per observation key; unseen keys have all-zero logits.

    Distributions are taken over the environment's valid actions at that
    observation, so every valid action keeps strictly positive mass.
    """

    def __init__(self, num_actions: int, logits: dict[Key, list[float]] | None = None,
                 key_fn: KeyFn = history_key) -> None:
        self.num_actions = num_actions
        self.logits: dict[Key, list[float]] = logits if logits is not None else {}
        self.key_fn = key_fn
        self._uniform: dict[int, list[float]] = {}

    def probs(self, key: Key, valid: Sequence[int]) -> list[float]:
        row = self.logits.get(key)
        if row is None:
            n = len(valid)
            u = self._uniform.get(n)
            if u is None:
                u = self._uniform[n] = [1.0 / n] * n
            return u
        return kernels.masked_softmax(row, valid)

    def distribution(self, obs: Observation, valid: Sequence[int]) -> list[float]:
        return self.probs(self.key_fn(obs), valid)

    def act(self, obs: Observation, valid: Sequence[int], rng: random.Random) -> int:
        return valid[kernels.sample_index(self.probs(self.key_fn(obs), valid), rng.random())]

    def greedy(self, obs: Observation, valid: Sequence[int], rng: random.Random | None = None) -> int:
        p = self.probs(self.key_fn(obs), valid)
        return valid[max(range(len(p)), key=p.__getitem__)]

    def apply(self, grads: Mapping[Key, list[float]], lr: float) -> None:
        for key, g in grads.items():
            row = self.logits.get(key)
            if row is None:
                row = self.logits[key] = [0.0] * self.num_actions
            for a in range(self.num_actions):
                if g[a] != 0.0:
                    row[a] += lr * g[a]

    def copy(self) -> PolicyTable:
        return PolicyTable(self.num_actions, {k: list(v) for k, v in self.logits.items()}, self.key_fn)

    def __len__(self) -> int:
        return len(self.logits)


class ValueTable:
    def __init__(self, values: dict[Key, float] | None = None, key_fn: KeyFn = history_key) -> None:
        self.values: dict[Key, float] = values if values is not None else {}
        self.key_fn = key_fn

    def get(self, key: Key) -> float:
        return self.values.get(key, 0.0)

    def copy(self) -> ValueTable:
        return ValueTable(dict(self.values), self.key_fn)

    def __len__(self) -> int:
        return len(self.values)


# -- config / metrics ------------------------------------------------------


@dataclass(frozen=True)
class TrainerConfig:
    lr_policy: float = 1e-2
    lr_value: float = 1e-2
    batch_size: int = 16
    kl_coef: float = 0.02
    gae_lambda: float = 0.95
    gamma: float = 0.95
    horizon: int = 6
    alpha_ext: float = 3.0
    alpha_int: float = 5.0
    shaping: ShapingKind | None = ShapingKind.DIFFACC
    tau: float = 1.0
    total_steps: int = 50_000
    eval_every: int = 1_000
    seed: int = 0
    eval_episodes: int = 200
    prob_floor: float = 1e-6
    # "history": full event history; "summary": the environment's compact key
    policy_key: str = "history"
    # stop as soon as held-out success reaches this level (None: run the full budget)
    target_success: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.gae_lambda <= 1.0):
            raise ConfigError("gamma and gae_lambda must lie in [0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.tau <= 0.0:
            raise ConfigError("tau must be positive")
        if self.total_steps < 0 or self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigError("total_steps, eval_every and eval_episodes must be positive")
        if self.policy_key not in ("history", "summary"):
            raise ConfigError(f"policy_key must be 'history' or 'summary', not {self.policy_key!r}")
        if isinstance(self.shaping, str):
            object.__setattr__(self, "shaping", ShapingKind.parse(self.shaping))

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["shaping"] = self.shaping.value if self.shaping is not None else None
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> TrainerConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(rec) - known
        if unknown:
            raise ConfigError(f"unknown trainer fields {sorted(unknown)}")
        rec = dict(rec)
        if rec.get("shaping") is not None:
            rec["shaping"] = ShapingKind.parse(str(rec["shaping"]))
        try:
            return cls(**rec)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class IterationMetrics:
    step: int
    mean_extrinsic: float
    mean_intrinsic: float
    mean_kl: float
    success_rate: float
    third_turn_calibrated_accuracy: float
    mean_episode_length: float
    question_histogram: list[int]
    personalization_score: float | None = None

    def to_record(self) -> dict:
        return asdict(self)


# -- reward assembly and propagation ---------------------------------------


def total_reward(r_ext: float, r_int: float, kl: float, cfg: TrainerConfig) -> float:
    return cfg.alpha_ext * r_ext + cfg.alpha_int * r_int - cfg.kl_coef * kl


def kl_penalty(policy_dist: Sequence[float], ref_dist: Sequence[float]) -> float:
    """KL(pi || pi_ref) between strictly positive distributions over the same actions."""
    if len(policy_dist) != len(ref_dist):
        raise LengthMismatch("distributions differ in length")
    return kernels.kl_divergence(policy_dist, ref_dist, 0.0)


def gae_propagate(rewards: Sequence[float], values: Sequence[float], gamma: float, lam: float) -> list[float]:
    """Per-turn propagated rewards; ``values`` holds V(s_0..s_T) with V(s_T) = 0."""
    if len(values) != len(rewards) + 1:
        raise LengthMismatch(f"need {len(rewards) + 1} values, got {len(values)}")
    if values[-1] != 0.0:
        raise ValueError("terminal value V(s_T) must be 0")
    return kernels.gae_propagate(rewards, values, gamma, lam)


@dataclass
class EpisodeSample:
    """What one training episode contributes to the updates."""

    keys: list[Key]
    valid: list[Sequence[int]]
    probs: list[list[float]]
    positions: list[int]
    rewards: list[float]
    rhat: list[float] = field(default_factory=list)
    trajectory: Trajectory | None = None


def policy_gradient(batch: Sequence[EpisodeSample], num_actions: int) -> dict[Key, list[float]]:
    """Batch-mean of sum_t r_hat_t (onehot(a_t) - pi(.|s_t)) per key."""
    grads: dict[Key, list[float]] = {}
    scale = 1.0 / len(batch) if batch else 0.0
    for ep in batch:
        for key, valid, probs, pos, r in zip(ep.keys, ep.valid, ep.probs, ep.positions, ep.rhat):
            if r == 0.0:
                continue
            g = grads.get(key)
            if g is None:
                g = grads[key] = [0.0] * num_actions
            kernels.accumulate_policy_grad(g, probs, valid, pos, r * scale)
    return grads


def log_likelihood_objective(policy: PolicyTable, batch: Sequence[EpisodeSample]) -> float:
    """mean_batch sum_t r_hat_t log pi(a_t | s_t) at the policy's current logits."""
    total = 0.0
    for ep in batch:
        for key, valid, pos, r in zip(ep.keys, ep.valid, ep.positions, ep.rhat):
            total += r * math.log(policy.probs(key, valid)[pos])
    return total / len(batch)


def reinforce_update(policy: PolicyTable, batch: Sequence[EpisodeSample], lr: float) -> PolicyTable:
    """One ascent step on the batch objective; updates ``policy`` in place and returns it."""
    policy.apply(policy_gradient(batch, policy.num_actions), lr)
    return policy


def value_update(values: ValueTable, batch: Sequence[EpisodeSample], gamma: float, lr: float) -> ValueTable:
    """Move each visited key toward its mean discounted return-to-go (in place)."""
    if lr == 0.0:
        return values
    sums: dict[Key, list[float]] = {}
    for ep in batch:
        for key, g in zip(ep.keys, kernels.discounted_returns(ep.rewards, gamma)):
            acc = sums.get(key)
            if acc is None:
                sums[key] = [g, 1.0]
            else:
                acc[0] += g
                acc[1] += 1.0
    table = values.values
    for key, (s, n) in sums.items():
        v = table.get(key, 0.0)
        table[key] = v + lr * (s / n - v)
    return values


# -- training loop ---------------------------------------------------------


@dataclass
class Checkpoint:
    step: int
    eval_extrinsic: float
    policy: PolicyTable
    value: ValueTable


class Trainer:
    """Owns the policy, value and reference tables for one training run.

    ``train_users`` are drawn uniformly per episode; evaluation replays the
    same ``eval_episodes`` seeds on ``eval_users`` at every eval point.
    """

    def __init__(
        self,
        env: EnvironmentSpec,
        cfg: TrainerConfig,
        engine: BeliefEngine,
        train_users: Sequence[Any],
        eval_users: Sequence[Any],
        eval_engine: BeliefEngine | None = None,
        policy: PolicyTable | None = None,
    ) -> None:
        if cfg.horizon != env.horizon:
            raise ConfigError(f"trainer horizon {cfg.horizon} != environment horizon {env.horizon}")
        if not train_users or not eval_users:
            raise ConfigError("need training and evaluation users")
        self.env = env
        self.cfg = cfg
        self.engine = engine
        self.eval_engine = eval_engine or engine
        self.train_users = tuple(train_users)
        self.eval_users = tuple(eval_users)
        key_fn = history_key if cfg.policy_key == "history" else env.summary_key
        self.policy = policy.copy() if policy is not None else PolicyTable(env.num_actions, key_fn=key_fn)
        self.reference = self.policy.copy()
        self.value = ValueTable(key_fn=self.policy.key_fn)
        self.shaping_cfg = ShapingConfig(cfg.gamma, cfg.prob_floor, env.num_types)
        self.intrinsic = make_intrinsic(cfg.shaping, self.shaping_cfg) if cfg.shaping is not None else None
        self.step = 0
        self.best: Checkpoint | None = None
        self._user_rng = random.Random(derive_seed(cfg.seed, -1))
        self._eval_seed = derive_seed(cfg.seed, -2)

    # one episode under the current policy, recording what the updates need
    def _episode(self, user: Any, seed: int) -> EpisodeSample:
        pol = self.policy
        key_fn = pol.key_fn
        keys: list[Key] = []
        valids: list[Sequence[int]] = []
        probs_l: list[list[float]] = []
        positions: list[int] = []

        def act(obs: Observation, valid: Sequence[int], rng: random.Random) -> int:
            key = key_fn(obs)
            p = pol.probs(key, valid)
            i = kernels.sample_index(p, rng.random())
            keys.append(key)
            valids.append(valid)
            probs_l.append(p)
            positions.append(i)
            return valid[i]

        traj = rollout(self.env, act, self.engine, user, seed, self.intrinsic)
        return EpisodeSample(keys, valids, probs_l, positions, [], trajectory=traj)

    def _assemble(self, ep: EpisodeSample) -> None:
        cfg = self.cfg
        ref = self.reference
        rewards = []
        for t, key, valid, p in zip(ep.trajectory.turns, ep.keys, ep.valid, ep.probs):
            kl = kernels.kl_divergence(p, ref.probs(key, valid), 0.0) if cfg.kl_coef else 0.0
            rewards.append(total_reward(t.r_ext, t.r_int, kl, cfg))
        ep.rewards = rewards
        vals = [self.value.get(k) for k in ep.keys] + [0.0]
        ep.rhat = kernels.gae_propagate(rewards, vals, cfg.gamma, cfg.gae_lambda)

    def iteration(self) -> list[EpisodeSample]:
        batch = []
        for _ in range(self.cfg.batch_size):
            user = self.train_users[self._user_rng.randrange(len(self.train_users))]
            ep = self._episode(user, derive_seed(self.cfg.seed, self.step))
            self._assemble(ep)
            batch.append(ep)
            self.step += 1
        reinforce_update(self.policy, batch, self.cfg.lr_policy)
        value_update(self.value, batch, self.cfg.gamma, self.cfg.lr_value)
        return batch

    def evaluate(self) -> tuple[IterationMetrics, EvalReport]:
        trajs = run_episodes(self.policy.act, self.env, self.eval_users, self.cfg.eval_episodes,
                             self._eval_seed, self.eval_engine, self.intrinsic)
        report = summarize(self.env, self.eval_engine, trajs)
        kl = 0.0
        for traj in trajs:
            for t in traj.turns:
                valid = self.env.valid_actions(t.obs_before)
                key = self.policy.key_fn(t.obs_before)
                kl += kernels.kl_divergence(self.policy.probs(key, valid), self.reference.probs(key, valid), 0.0)
        m = IterationMetrics(
            step=self.step,
            mean_extrinsic=report.mean_extrinsic,
            mean_intrinsic=report.mean_intrinsic,
            mean_kl=kl / len(trajs),
            success_rate=report.success_rate,
            third_turn_calibrated_accuracy=report.third_turn_calibrated_accuracy,
            mean_episode_length=report.mean_episode_length,
            question_histogram=report.question_histogram,
            personalization_score=report.personalization_score,
        )
        if self.best is None or m.mean_extrinsic > self.best.eval_extrinsic:
            self.best = Checkpoint(self.step, m.mean_extrinsic, self.policy.copy(), self.value.copy())
        return m, report

    def run(self) -> Iterator[IterationMetrics]:
        cfg = self.cfg
        m, _ = self.evaluate()
        yield m
        if cfg.target_success is not None and m.success_rate >= cfg.target_success:
            return
        next_eval = cfg.eval_every
        while self.step < cfg.total_steps:
            self.iteration()
            if self.step >= next_eval or self.step >= cfg.total_steps:
                while next_eval <= self.step:
                    next_eval += cfg.eval_every
                m, _ = self.evaluate()
                yield m
                if cfg.target_success is not None and m.success_rate >= cfg.target_success:
                    return


def train(
    env: EnvironmentSpec,
    cfg: TrainerConfig,
    engine: BeliefEngine,
    train_users: Sequence[Any],
    eval_users: Sequence[Any],
    **kwargs: Any,
) -> Iterator[IterationMetrics]:
    """Stream of metrics at every eval point, starting with the untrained policy."""
    return Trainer(env, cfg, engine, train_users, eval_users, **kwargs).run()


def with_overrides(cfg: TrainerConfig, **kw: Any) -> TrainerConfig:
    return replace(cfg, **kw)
