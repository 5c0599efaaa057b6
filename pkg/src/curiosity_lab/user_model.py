"""Belief engines: exact Bayes, the attribute-reading strategy classifier, and a style classifier.

The strategy classifier reads which of the five relevant attributes the user
has disclosed, substitutes population priors for the rest, and pushes them
through the eight product-form strategy probabilities.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from curiosity_lab import kernels
from curiosity_lab.core import Belief, EnvironmentSpec, Observation, Trajectory, belief_update
from curiosity_lab.envs import exercise as ex
from curiosity_lab.envs import style as st
from curiosity_lab.errors import ConfigError, WrongEnvironment

ObsLike = Union[Observation, Trajectory]


class AttributeAnswer(enum.IntEnum):
    FALSE = 0
    TRUE = 1
    UNKNOWN = -1


# classifier keys, in the order the product formulas consume them
SHEET_KEYS = ("injury", "outdoor", "extroverted", "motivation", "low_ses")
_ATTR_TO_KEY = {"injury": "injury", "outdoor": "outdoor", "personality": "extroverted",
                "motivation": "motivation", "ses": "low_ses"}


@dataclass(frozen=True)
class AttributePriors:
    """P(True) substituted for attributes the classifier cannot read yet."""

    low_ses: float = 0.2
    injury: float = 0.25
    extroverted: float = 0.4
    motivation: float = 0.5
    outdoor: float = 0.4

    def __post_init__(self) -> None:
        for k in SHEET_KEYS:
            if not 0.0 <= getattr(self, k) <= 1.0:
                raise ConfigError(f"prior {k} must lie in [0, 1]")

    def by_attribute(self) -> dict[str, float]:
        """The same priors keyed by relevant-attribute name (environment convention)."""
        return {attr: getattr(self, key) for attr, key in _ATTR_TO_KEY.items()}

    @classmethod
    def from_mapping(cls, rec: Mapping[str, float]) -> AttributePriors:
        unknown = set(rec) - set(SHEET_KEYS)
        if unknown:
            raise ConfigError(f"unknown prior keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in rec.items()})


@dataclass(frozen=True)
class AnswerSheet:
    injury: AttributeAnswer = AttributeAnswer.UNKNOWN
    outdoor: AttributeAnswer = AttributeAnswer.UNKNOWN
    extroverted: AttributeAnswer = AttributeAnswer.UNKNOWN
    motivation: AttributeAnswer = AttributeAnswer.UNKNOWN
    low_ses: AttributeAnswer = AttributeAnswer.UNKNOWN

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(int(getattr(self, k)) for k in SHEET_KEYS)

    def as_dict(self) -> dict[str, AttributeAnswer]:
        return {k: getattr(self, k) for k in SHEET_KEYS}

    @classmethod
    def from_tuple(cls, values: Sequence[int]) -> AnswerSheet:
        return cls(*(AttributeAnswer(v) for v in values))


def all_answer_sheets() -> Iterator[AnswerSheet]:
    """All 3^5 = 243 sheets."""
    for combo in itertools.product((AttributeAnswer.TRUE, AttributeAnswer.FALSE, AttributeAnswer.UNKNOWN), repeat=5):
        yield AnswerSheet(*combo)


def _answer_tuple(env: ex.ExerciseEnv, obs: Observation) -> tuple[int, ...]:
    vals = [-1, -1, -1, -1, -1]
    n_actions = env.num_actions
    for a, r in obs.exchanges():
        if not 0 <= a < n_actions:
            raise WrongEnvironment(f"action {a} is not in the exercise alphabet")
        if a < env.num_relevant:
            if r == ex.WITHHELD:
                continue
            ans = ex.RESPONSE_ANSWER.get(r)
            attr = env.askable[a]
            if ans is None or ans[0] != attr:
                raise WrongEnvironment(f"response {r} does not answer ask:{attr}")
            vals[_SLOT[attr]] = 1 if ans[1] else 0
        elif a < env.recommend_base:
            if r < ex.DISTRACTOR_BASE:
                raise WrongEnvironment(f"response {r} does not answer a distractor question")
        elif r != ex.ACK:
            raise WrongEnvironment(f"response {r} does not follow a recommendation")
    return tuple(vals)


_SLOT = {attr: SHEET_KEYS.index(key) for attr, key in _ATTR_TO_KEY.items()}


def extract_answers(env: ex.ExerciseEnv, trajectory: ObsLike) -> AnswerSheet:
    """Which relevant attributes the conversation has disclosed, and their values."""
    obs = trajectory.final_obs if isinstance(trajectory, Trajectory) else trajectory
    if not isinstance(env, ex.ExerciseEnv):
        raise WrongEnvironment("answer extraction needs the exercise environment")
    return AnswerSheet.from_tuple(_answer_tuple(env, obs))


def _strategy_probs_from_tuple(vals: Sequence[int], priors: AttributePriors) -> Belief:
    p = []
    for key, v in zip(SHEET_KEYS, vals):
        p.append(getattr(priors, key) if v == -1 else float(v))
    # p: injury, outdoor, extroverted, motivation, low_ses
    return kernels.strategy_probs(p[0], p[1], p[2], p[3], p[4])


def strategy_distribution(sheet: AnswerSheet, priors: AttributePriors | None = None) -> Belief:
    """Distribution over the eight strategies (index i is strategy i + 1)."""
    return _strategy_probs_from_tuple(sheet.as_tuple(), priors or AttributePriors())


def temper(b: Sequence[float], tau: float) -> Belief:
    """Flatten (tau > 1) or sharpen (tau < 1): b(u)^(1/tau), renormalized."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if tau == 1.0:
        return tuple(b)
    return kernels.temper(b, tau)


def exact_bayes_predict(env: EnvironmentSpec, trajectory: ObsLike, prior: Sequence[float]) -> Belief:
    """Sequential Bayes updates over every user response in the conversation."""
    obs = trajectory.final_obs if isinstance(trajectory, Trajectory) else trajectory
    b: Belief = tuple(prior)
    cur = Observation()
    for a, r in obs.exchanges():
        b = belief_update(b, env.likelihood_vector(cur, a, r))
        cur = cur.extend(a, r)
    return b


def _as_obs(x: ObsLike) -> Observation:
    return x.final_obs if isinstance(x, Trajectory) else x


class ExactBayesEngine:
    """Exact posterior from the environment's likelihood rule, optionally tempered."""

    def __init__(self, env: EnvironmentSpec, prior: Sequence[float], tau: float = 1.0) -> None:
        self.env = env
        self._prior = tuple(prior)
        self.tau = tau
        self._cache: dict[tuple, Belief] = {}

    def prior(self) -> Belief:
        return temper(self._prior, self.tau)

    def predict(self, trajectory: ObsLike) -> Belief:
        obs = _as_obs(trajectory)
        hit = self._cache.get(obs.events)
        if hit is None:
            hit = temper(exact_bayes_predict(self.env, obs, self._prior), self.tau)
            self._cache[obs.events] = hit
        return hit

    def update(self, belief: Belief, obs_before: Observation, action: int, response: int,
               obs_after: Observation) -> Belief:
        if self.tau == 1.0:
            return belief_update(belief, self.env.likelihood_vector(obs_before, action, response))
        return self.predict(obs_after)


class StrategyClassifierEngine:
    """Attribute-reading strategy classifier for the exercise task.

    ``predict`` = temper(strategy_distribution(extract_answers(conversation)), tau).
    """

    def __init__(self, env: ex.ExerciseEnv, priors: AttributePriors | None = None, tau: float = 1.0,
                 fixed: Mapping[str, bool] | None = None) -> None:
        self.env = env
        self.priors = priors or AttributePriors()
        self.tau = tau
        # attributes pinned for every user (reduced instances), keyed by relevant attribute
        self._fixed = {_SLOT[a]: int(v) for a, v in (fixed or {}).items()}
        self._cache: dict[tuple[int, ...], Belief] = {}

    def _from_tuple(self, vals: tuple[int, ...]) -> Belief:
        hit = self._cache.get(vals)
        if hit is None:
            if self._fixed:
                lst = list(vals)
                for slot, v in self._fixed.items():
                    lst[slot] = v
                raw = _strategy_probs_from_tuple(lst, self.priors)
            else:
                raw = _strategy_probs_from_tuple(vals, self.priors)
            hit = temper(raw, self.tau)
            self._cache[vals] = hit
        return hit

    def prior(self) -> Belief:
        return self._from_tuple((-1, -1, -1, -1, -1))

    def predict(self, trajectory: ObsLike) -> Belief:
        return self._from_tuple(_answer_tuple(self.env, _as_obs(trajectory)))

    def update(self, belief: Belief, obs_before: Observation, action: int, response: int,
               obs_after: Observation) -> Belief:
        return self.predict(obs_after)


class StyleClassifierEngine:
    """Posterior over the two learning styles as a conversation reader sees it.

    A disclosure of style s multiplies the odds for s by
    ``reliability / (1 - reliability)``; with ``reliability = 1`` a disclosure
    is decisive and the engine equals exact Bayes (neutral replies carry the
    same spontaneous-reveal likelihood under both styles and cancel).
    ``teach_evidence`` > 0 lets the conversation content itself sway the
    reader: every teaching move in style s adds that much log-odds to s.
    The result is tempered by ``tau``.
    """

    def __init__(self, reliability: float = 1.0, teach_evidence: float = 0.0, tau: float = 1.0,
                 prior: Sequence[float] = (0.5, 0.5)) -> None:
        if not 0.5 < reliability <= 1.0:
            raise ConfigError("reliability must lie in (0.5, 1]")
        self.reliability = reliability
        self.teach_evidence = teach_evidence
        self.tau = tau
        self._prior = tuple(prior)
        self._cache: dict[tuple, Belief] = {}

    def prior(self) -> Belief:
        return temper(self._prior, self.tau)

    def _counts(self, obs: Observation) -> tuple[int, int, int, int]:
        d_story = d_hands = t_story = t_hands = 0
        for a, r in obs.exchanges():
            if r == st.PREFERS_STORY:
                d_story += 1
            elif r == st.PREFERS_HANDS_ON:
                d_hands += 1
            if a == st.TEACH_STORY:
                t_story += 1
            elif a == st.TEACH_HANDS_ON:
                t_hands += 1
        return d_story, d_hands, t_story, t_hands

    def predict(self, trajectory: ObsLike) -> Belief:
        counts = self._counts(_as_obs(trajectory))
        hit = self._cache.get(counts)
        if hit is None:
            hit = self._belief(*counts)
            self._cache[counts] = hit
        return hit

    def _belief(self, d_story: int, d_hands: int, t_story: int, t_hands: int) -> Belief:
        p0, p1 = self._prior
        if self.reliability == 1.0:
            if d_story and d_hands:
                raise ConfigError("contradictory decisive disclosures")
            if d_story:
                p1 = 0.0
            elif d_hands:
                p0 = 0.0
            log_odds_disc = 0.0
        else:
            log_odds_disc = (d_story - d_hands) * math.log(self.reliability / (1.0 - self.reliability))
        if p0 == 0.0 or p1 == 0.0:
            post = (1.0 if p0 > 0.0 else 0.0, 1.0 if p1 > 0.0 else 0.0)
        else:
            z = math.log(p0 / p1) + log_odds_disc + self.teach_evidence * (t_story - t_hands)
            z /= self.tau
            # logistic without overflow
            if z >= 0:
                e = math.exp(-z)
                post = (1.0 / (1.0 + e), e / (1.0 + e))
            else:
                e = math.exp(z)
                post = (e / (1.0 + e), 1.0 / (1.0 + e))
            return post
        return temper(post, self.tau)

    def update(self, belief: Belief, obs_before: Observation, action: int, response: int,
               obs_after: Observation) -> Belief:
        return self.predict(obs_after)


class ConstantEngine:
    """Belief that never moves; useful for ablations and invariance checks."""

    def __init__(self, belief: Sequence[float]) -> None:
        self._b = tuple(belief)

    def prior(self) -> Belief:
        return self._b

    def predict(self, trajectory: ObsLike) -> Belief:
        return self._b

    def update(self, belief: Belief, obs_before: Observation, action: int, response: int,
               obs_after: Observation) -> Belief:
        return self._b
