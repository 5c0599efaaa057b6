"""Pure-exploration combinatorial bandits: find the useful arm subset U*.

Each episode pulls a super-arm S of k arms. Full-bandit feedback returns only
the episode reward; semi-bandit feedback also returns every pulled arm's own
outcome. Rewards are additive (sum of Normal(mu_a, sigma), mu_a = 1 on U*)
or conjunctive (1 iff U* is inside S).

Identification strategies:

* semi: covering sweeps plus anytime confidence-interval elimination on the
  per-arm outcomes.
* full, additive: paired super-arms that differ in one arm. With a base set B
  of k-1 arms and two outside arms p, q, every arm x gets a score
  s_x = R(B+x) for x outside B and s_b = R(B+p) + R(B+q) - R(B-b+p+q) for b
  in B; each score estimates sum(B) + mu_x, so ranking scores ranks arms.
* full, conjunctive: adaptive halving over the candidate m-subsets, pulling
  the super-arm that splits the surviving candidates most evenly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from curiosity_lab.core import derive_seed
from curiosity_lab.errors import BudgetExceeded, ConfigError, WrongArity

ADDITIVE = "additive"
CONJUNCTIVE = "conjunctive"
FULL = "full"
SEMI = "semi"


@dataclass(frozen=True)
class BanditInstance:
    K: int
    k: int
    m: int
    useful: frozenset[int]
    reward_kind: str = ADDITIVE
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.m <= self.k <= self.K:
            raise ConfigError("need 1 <= m <= k <= K")
        if len(self.useful) != self.m or not all(0 <= a < self.K for a in self.useful):
            raise ConfigError("useful set must hold m distinct arms of the catalogue")
        if self.reward_kind not in (ADDITIVE, CONJUNCTIVE):
            raise ConfigError(f"unknown reward kind {self.reward_kind!r}")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")
        object.__setattr__(self, "useful", frozenset(self.useful))

    @property
    def outcome_sigma(self) -> float:
        """Noise on a single arm's outcome; conjunctive indicators are exact."""
        return self.noise_sigma if self.reward_kind == ADDITIVE else 0.0

    def relabel(self, perm: Sequence[int]) -> BanditInstance:
        return BanditInstance(self.K, self.k, self.m, frozenset(perm[a] for a in self.useful),
                              self.reward_kind, self.noise_sigma)


@dataclass(frozen=True)
class Feedback:
    reward: float
    per_arm: dict[int, float] | None = None


def bandit_episode(instance: BanditInstance, arms: Sequence[int], mode: str, rng: np.random.Generator) -> Feedback:
    """Pull super-arm ``arms`` once."""
    S = tuple(arms)
    if len(S) != instance.k or len(set(S)) != instance.k:
        raise WrongArity(f"super-arm must hold {instance.k} distinct arms, got {S}")
    if not all(0 <= a < instance.K for a in S):
        raise WrongArity(f"arm outside catalogue in {S}")
    if mode not in (FULL, SEMI):
        raise ConfigError(f"unknown feedback mode {mode!r}")
    useful = instance.useful
    if instance.reward_kind == ADDITIVE:
        means = np.array([1.0 if a in useful else 0.0 for a in S])
        if instance.noise_sigma > 0.0:
            outcomes = means + rng.normal(0.0, instance.noise_sigma, size=len(S))
        else:
            outcomes = means
        reward = float(outcomes.sum())
        per_arm = {a: float(x) for a, x in zip(S, outcomes)}
    else:
        reward = 1.0 if useful.issubset(S) else 0.0
        per_arm = {a: (1.0 if a in useful else 0.0) for a in S}
    return Feedback(reward, per_arm if mode == SEMI else None)


@dataclass(frozen=True)
class StrategyConfig:
    max_episodes: int = 1_000_000


@dataclass(frozen=True)
class IdentificationResult:
    estimate: frozenset[int]
    episodes_used: int
    correct: bool


def ci_radius(sigma: float, n: int, num_arms: int, delta: float) -> float:
    """Anytime radius sigma * sqrt(2 log(4 K n^2 / delta) / n), union-bounded over arms and n."""
    if sigma == 0.0:
        return 0.0
    return sigma * math.sqrt(2.0 * math.log(4.0 * num_arms * n * n / delta) / n)


def _separated(means: Sequence[float], radius: float, m: int) -> frozenset[int] | None:
    """Top-m arms once their confidence intervals clear every other arm's."""
    order = sorted(range(len(means)), key=lambda a: (-means[a], a))
    top, rest = order[:m], order[m:]
    if not rest:
        return frozenset(top)
    if min(means[a] for a in top) - radius > max(means[a] for a in rest) + radius:
        return frozenset(top)
    return None


class _Budget:
    def __init__(self, cap: int) -> None:
        self.cap = cap
        self.used = 0

    def take(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.cap:
            raise BudgetExceeded(f"episode cap {self.cap} reached")


def _covering(K: int, k: int) -> list[tuple[int, ...]]:
    """ceil(K/k) super-arms covering every arm; the last is padded from the front."""
    out = []
    for start in range(0, K, k):
        block = list(range(start, min(start + k, K)))
        pad = 0
        while len(block) < k:
            if pad not in block:
                block.append(pad)
            pad += 1
        out.append(tuple(block))
    return out


def _semi(instance: BanditInstance, delta: float, rng: np.random.Generator, budget: _Budget) -> frozenset[int]:
    K = instance.K
    sums = [0.0] * K
    counts = [0] * K
    cover = _covering(K, instance.k)
    while True:
        for S in cover:
            budget.take()
            fb = bandit_episode(instance, S, SEMI, rng)
            for a, x in fb.per_arm.items():
                sums[a] += x
                counts[a] += 1
        n = min(counts)
        means = [sums[a] / counts[a] for a in range(K)]
        # arms padded into the last block carry extra samples; the common minimum keeps radii valid
        found = _separated(means, ci_radius(instance.outcome_sigma, n, K, delta), instance.m)
        if found is not None:
            return found


def _full_additive(instance: BanditInstance, delta: float, rng: np.random.Generator,
                   budget: _Budget) -> frozenset[int]:
    K, k = instance.K, instance.k
    if K - (k - 1) < 2:
        raise ConfigError("paired probing needs at least two arms outside the base set (k <= K - 1)")
    base = list(range(k - 1))
    outside = list(range(k - 1, K))
    p, q = outside[0], outside[1]
    # a score's noise is the sum of at most three pulls of k arms each
    sigma_score = instance.noise_sigma * math.sqrt(3.0 * k)
    sums = [0.0] * K
    n = 0
    while True:
        pulled: dict[int, float] = {}
        for x in outside:
            budget.take()
            pulled[x] = bandit_episode(instance, base + [x], FULL, rng).reward
            sums[x] += pulled[x]
        for b in base:
            budget.take()
            swapped = [a for a in base if a != b] + [p, q]
            r = bandit_episode(instance, swapped, FULL, rng).reward
            sums[b] += pulled[p] + pulled[q] - r
        n += 1
        means = [s / n for s in sums]
        found = _separated(means, ci_radius(sigma_score, n, K, delta), instance.m)
        if found is not None:
            return found


def _full_conjunctive(instance: BanditInstance, rng: np.random.Generator, budget: _Budget) -> frozenset[int]:
    K, k, m = instance.K, instance.k, instance.m
    candidates = [frozenset(c) for c in itertools.combinations(range(K), m)]
    supers = [frozenset(s) for s in itertools.combinations(range(K), k)]
    while len(candidates) > 1:
        best, best_score = None, -1
        for S in supers:
            inside = sum(1 for c in candidates if c <= S)
            score = min(inside, len(candidates) - inside)
            if score > best_score:
                best, best_score = S, score
        budget.take()
        hit = bandit_episode(instance, sorted(best), FULL, rng).reward > 0.5
        candidates = [c for c in candidates if (c <= best) == hit]
    if not candidates:
        raise BudgetExceeded("no candidate subset is consistent with the feedback")
    return candidates[0]


def identify_subset(
    instance: BanditInstance,
    mode: str,
    delta: float,
    config: StrategyConfig | None = None,
    rng: np.random.Generator | None = None,
) -> IdentificationResult:
    if not 0.0 < delta < 1.0:
        raise ConfigError("delta must lie in (0, 1)")
    config = config or StrategyConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    budget = _Budget(config.max_episodes)
    if mode == SEMI:
        est = _semi(instance, delta, rng, budget)
    elif mode == FULL:
        if instance.reward_kind == ADDITIVE:
            est = _full_additive(instance, delta, rng, budget)
        else:
            est = _full_conjunctive(instance, rng, budget)
    else:
        raise ConfigError(f"unknown feedback mode {mode!r}")
    return IdentificationResult(est, budget.used, est == instance.useful)


def _quartiles(xs: Sequence[int]) -> list[float]:
    return [float(v) for v in np.quantile(np.asarray(xs, dtype=float), [0.25, 0.5, 0.75])]


def compare_sample_complexity(
    instance: BanditInstance,
    delta: float,
    trials: int,
    seed: int = 0,
    config: StrategyConfig | None = None,
    randomize_useful: bool = True,
) -> dict:
    """Run both feedback modes on the same per-trial instances and noise seeds."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    out: dict = {
        "K": instance.K, "k": instance.k, "m": instance.m,
        "reward_kind": instance.reward_kind, "sigma": instance.noise_sigma,
        "delta": delta, "trials": trials, "seed": seed,
    }
    for mode in (SEMI, FULL):
        episodes, correct = [], 0
        for t in range(trials):
            trial_seed = derive_seed(seed, t)
            inst = instance
            if randomize_useful:
                perm = np.random.default_rng(trial_seed).permutation(instance.K)
                inst = instance.relabel([int(x) for x in perm])
            res = identify_subset(inst, mode, delta, config, np.random.default_rng(derive_seed(trial_seed, 1)))
            episodes.append(res.episodes_used)
            correct += res.correct
        out[mode] = {"success_rate": correct / trials, "episodes_quartiles": _quartiles(episodes)}
    return out
