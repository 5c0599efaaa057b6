"""Exercise Recommendation: elicit five relevant attributes, recommend one of 8 strategies.

Users carry five decision-relevant attributes plus distractor attributes
(stand-ins for name, hobbies, etc.). The agent asks questions for all but
the final turn, then must recommend a strategy.

Strategies (1-indexed, as in the logic rules):

1. walking in parks           -- injured, outdoorsy
2. yoga / tai chi at home     -- injured, indoorsy
3. jogging or hiking          -- no injury, outdoorsy, introverted
4. team sport                 -- no injury, outdoorsy, extroverted
5. gym membership discount    -- no injury, indoorsy, low SES
6. home gym equipment         -- no injury, indoorsy, higher SES, introverted, motivated
7. personal trainer           -- no injury, indoorsy, higher SES, introverted, struggling
8. group gym class            -- no injury, indoorsy, higher SES, extroverted
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence, TextIO

import numpy as np

from curiosity_lab.core import ActionKind, EnvironmentSpec, Observation, Trajectory
from curiosity_lab.errors import (
    ConfigError,
    EpisodeOver,
    PolicyActionOutOfRange,
    RecommendBeforeFinalTurn,
)

NUM_STRATEGIES = 8
STRATEGY_LABELS = (
    "walking_in_parks",
    "yoga_at_home",
    "jogging_hiking",
    "team_sport",
    "gym_discount",
    "home_gym",
    "personal_trainer",
    "group_class",
)

# relevant attributes, in ask-action order
ATTRIBUTES = ("injury", "outdoor", "personality", "ses", "motivation")
# classifier reading of each attribute: the boolean it asks about
CLASSIFIER_KEY = {
    "injury": "injury",
    "outdoor": "outdoor",
    "personality": "extroverted",
    "ses": "low_ses",
    "motivation": "motivation",
}

# response codes
INJURY_YES, INJURY_NO = 0, 1
OUTDOORSY, INDOORSY = 2, 3
INTROVERTED, EXTROVERTED = 4, 5
SES_LOW, SES_MEDIUM, SES_HIGH = 6, 7, 8
MOTIVATED, STRUGGLING = 9, 10
WITHHELD = 11
ACK = 12
DISTRACTOR_BASE = 100

RESPONSE_ANSWER = {
    INJURY_YES: ("injury", True),
    INJURY_NO: ("injury", False),
    OUTDOORSY: ("outdoor", True),
    INDOORSY: ("outdoor", False),
    INTROVERTED: ("personality", False),
    EXTROVERTED: ("personality", True),
    SES_LOW: ("ses", True),
    SES_MEDIUM: ("ses", False),
    SES_HIGH: ("ses", False),
    MOTIVATED: ("motivation", True),
    STRUGGLING: ("motivation", False),
}
ATTRIBUTE_RESPONSES = {
    "injury": (INJURY_YES, INJURY_NO),
    "outdoor": (OUTDOORSY, INDOORSY),
    "personality": (INTROVERTED, EXTROVERTED),
    "ses": (SES_LOW, SES_MEDIUM, SES_HIGH),
    "motivation": (MOTIVATED, STRUGGLING),
}

# SES sampling probabilities (low, medium, high); medium/high split within "not low"
SES_PROBS = (0.2, 0.6, 0.2)
_SES_NOT_LOW_SPLIT = {SES_MEDIUM: 0.6 / 0.8, SES_HIGH: 0.2 / 0.8}

# per-strategy attribute constraints (True = injured / outdoorsy / extroverted / low SES / motivated);
# attributes absent from a row are unconstrained for that strategy
STRATEGY_CONSTRAINTS: tuple[dict[str, bool], ...] = (
    {"injury": True, "outdoor": True},
    {"injury": True, "outdoor": False},
    {"injury": False, "outdoor": True, "personality": False},
    {"injury": False, "outdoor": True, "personality": True},
    {"injury": False, "outdoor": False, "ses": True},
    {"injury": False, "outdoor": False, "ses": False, "personality": False, "motivation": True},
    {"injury": False, "outdoor": False, "ses": False, "personality": False, "motivation": False},
    {"injury": False, "outdoor": False, "ses": False, "personality": True},
)


@dataclass(frozen=True)
class UserProfile:
    age: int
    ses: str
    injury: bool
    personality: str
    motivation: str
    outdoor: str
    distractors: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 15 <= self.age <= 64:
            raise ValueError(f"age {self.age} outside [15, 64]")
        if self.age >= 55 and not self.injury:
            raise ValueError("users aged 55+ always report an injury or limitation")
        if self.ses not in ("low", "medium", "high"):
            raise ValueError(f"bad ses {self.ses!r}")
        if self.personality not in ("introverted", "extroverted"):
            raise ValueError(f"bad personality {self.personality!r}")
        if self.motivation not in ("high", "struggling"):
            raise ValueError(f"bad motivation {self.motivation!r}")
        if self.outdoor not in ("outdoorsy", "indoorsy"):
            raise ValueError(f"bad outdoor {self.outdoor!r}")

    def answer(self, attribute: str) -> bool:
        """Boolean reading of a relevant attribute (the classifier's question)."""
        if attribute == "injury":
            return self.injury
        if attribute == "outdoor":
            return self.outdoor == "outdoorsy"
        if attribute == "personality":
            return self.personality == "extroverted"
        if attribute == "ses":
            return self.ses == "low"
        if attribute == "motivation":
            return self.motivation == "high"
        raise KeyError(attribute)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["distractors"] = list(self.distractors)
        return rec

    @classmethod
    def from_record(cls, rec: Mapping[str, Any]) -> UserProfile:
        return cls(
            age=int(rec["age"]),
            ses=str(rec["ses"]),
            injury=bool(rec["injury"]),
            personality=str(rec["personality"]),
            motivation=str(rec["motivation"]),
            outdoor=str(rec["outdoor"]),
            distractors=tuple(int(x) for x in rec.get("distractors", ())),
        )


def sample_profile(rng: np.random.Generator, num_distractors: int = 15, distractor_values: int = 4) -> UserProfile:
    """Draw one user with the population's attribute probabilities."""
    ses = ("low", "medium", "high")[int(rng.choice(3, p=SES_PROBS))]
    age = int(rng.integers(15, 65))
    injury = True if age >= 55 else bool(rng.random() < 0.1)
    personality = "introverted" if rng.random() < 0.6 else "extroverted"
    motivation = "high" if rng.random() < 0.5 else "struggling"
    outdoor = "outdoorsy" if rng.random() < 0.4 else "indoorsy"
    distractors = tuple(int(x) for x in rng.integers(0, distractor_values, size=num_distractors))
    return UserProfile(age, ses, injury, personality, motivation, outdoor, distractors)


def ground_truth_strategy(profile: UserProfile) -> int:
    """Strategy id in 1..8 from the deterministic logic rules."""
    if profile.injury:
        return 1 if profile.outdoor == "outdoorsy" else 2
    if profile.outdoor == "outdoorsy":
        return 3 if profile.personality == "introverted" else 4
    if profile.ses == "low":
        return 5
    if profile.personality == "introverted":
        return 6 if profile.motivation == "high" else 7
    return 8


def profile_from_answers(injury: bool, outdoor: bool, extroverted: bool, motivated: bool, ses: str,
                         age: int | None = None, distractors: tuple[int, ...] = (0,) * 15) -> UserProfile:
    if age is None:
        age = 60 if injury else 30
    return UserProfile(
        age=age,
        ses=ses,
        injury=injury,
        personality="extroverted" if extroverted else "introverted",
        motivation="high" if motivated else "struggling",
        outdoor="outdoorsy" if outdoor else "indoorsy",
        distractors=distractors,
    )


def all_relevant_profiles() -> list[UserProfile]:
    """One profile per relevant-attribute combination (2*2*2*2*3 = 48)."""
    out = []
    for injury in (True, False):
        for outdoor in (True, False):
            for extro in (False, True):
                for mot in (True, False):
                    for ses in ("low", "medium", "high"):
                        out.append(profile_from_answers(injury, outdoor, extro, mot, ses))
    return out


# -- corpus ----------------------------------------------------------------


@dataclass(frozen=True)
class ProfileCorpus:
    train: tuple[UserProfile, ...]
    eval: tuple[UserProfile, ...]

    def split(self, name: str) -> tuple[UserProfile, ...]:
        if name == "train":
            return self.train
        if name == "eval":
            return self.eval
        raise ConfigError(f"unknown split {name!r}")


def generate_corpus(n: int = 1000, split: Sequence[int] = (800, 200), seed: int = 0,
                    num_distractors: int = 15, distractor_values: int = 4) -> ProfileCorpus:
    if sum(split) != n:
        raise ConfigError(f"split {tuple(split)} does not sum to {n}")
    rng = np.random.default_rng(seed)
    profiles = [sample_profile(rng, num_distractors, distractor_values) for _ in range(n)]
    return ProfileCorpus(tuple(profiles[: split[0]]), tuple(profiles[split[0]:]))


def write_corpus(fh: TextIO, corpus: ProfileCorpus) -> None:
    for name in ("train", "eval"):
        for i, p in enumerate(corpus.split(name)):
            rec = {"split": name, "index": i, **p.to_record(), "strategy": ground_truth_strategy(p)}
            fh.write(json.dumps(rec) + "\n")


def read_corpus(fh: TextIO) -> ProfileCorpus:
    train, ev = [], []
    for line in fh:
        if not line.strip():
            continue
        rec = json.loads(line)
        (train if rec["split"] == "train" else ev).append(UserProfile.from_record(rec))
    return ProfileCorpus(tuple(train), tuple(ev))


# -- environment -----------------------------------------------------------


@dataclass(frozen=True)
class ExerciseEnvConfig:
    horizon: int = 6
    num_distractor_questions: int = 15
    distractor_values: int = 4
    response_noise: float = 0.0
    variable_length: bool = False
    askable: tuple[str, ...] = ATTRIBUTES
    # attribute priors used by the likelihood rule for unconstrained attributes
    priors: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_PRIORS))

    def __post_init__(self) -> None:
        if self.horizon < 2:
            raise ConfigError("exercise horizon must be >= 2 (questions plus a final recommendation)")
        if not 0.0 <= self.response_noise < 1.0:
            raise ConfigError("response_noise must lie in [0, 1)")
        if any(a not in ATTRIBUTES for a in self.askable):
            raise ConfigError(f"unknown askable attribute in {self.askable}")
        if self.distractor_values < 1 or self.num_distractor_questions < 0:
            raise ConfigError("bad distractor configuration")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["askable"] = list(self.askable)
        rec["priors"] = dict(self.priors)
        return rec


# classifier priors for attributes that have not been disclosed (keyed by relevant attribute)
DEFAULT_PRIORS = {"injury": 0.25, "outdoor": 0.4, "personality": 0.4, "ses": 0.2, "motivation": 0.5}


class ExerciseEnv(EnvironmentSpec):
    """Question-asking episodes with a forced recommendation on the last turn.

    With ``variable_length`` a recommendation may be made on any turn and ends
    the episode; the final turn still forces one.
    """

    name = "exercise"

    def __init__(self, config: ExerciseEnvConfig | None = None) -> None:
        self.config = config or ExerciseEnvConfig()
        cfg = self.config
        self.horizon = cfg.horizon
        self.variable_length = cfg.variable_length
        self.askable = tuple(cfg.askable)
        self.num_relevant = len(self.askable)
        self.num_distractors = cfg.num_distractor_questions
        self.recommend_base = self.num_relevant + self.num_distractors
        self._num_actions = self.recommend_base + NUM_STRATEGIES
        self.ask_actions = tuple(range(self.recommend_base))
        self.recommend_actions = tuple(range(self.recommend_base, self._num_actions))
        self._mid_actions = self.ask_actions + self.recommend_actions if self.variable_length else self.ask_actions
        self._noise = cfg.response_noise
        self._prior_true = {a: float(cfg.priors[a]) for a in ATTRIBUTES}

    # -- alphabet --

    @property
    def num_actions(self) -> int:
        return self._num_actions

    @property
    def type_labels(self) -> tuple[str, ...]:
        return STRATEGY_LABELS

    def action_kind(self, action: int) -> ActionKind:
        if action >= self.recommend_base:
            return ActionKind.RECOMMEND
        return ActionKind.ASK

    def ask_action(self, attribute: str) -> int:
        return self.askable.index(attribute)

    def distractor_action(self, index: int) -> int:
        if not 0 <= index < self.num_distractors:
            raise IndexError(index)
        return self.num_relevant + index

    def recommend_action(self, strategy: int) -> int:
        """Action id recommending 1-indexed ``strategy``."""
        return self.recommend_base + strategy - 1

    def attribute_of(self, action: int) -> str | None:
        return self.askable[action] if action < self.num_relevant else None

    def action_label(self, action: int) -> str:
        if action < self.num_relevant:
            return f"ask:{self.askable[action]}"
        if action < self.recommend_base:
            return f"ask:distractor{action - self.num_relevant}"
        return f"recommend:{action - self.recommend_base + 1}"

    def valid_actions(self, obs: Observation) -> tuple[int, ...]:
        if obs.turn >= self.horizon - 1:
            return self.recommend_actions
        return self._mid_actions

    def is_terminal(self, obs: Observation) -> bool:
        if obs.turn >= self.horizon:
            return True
        return self.variable_length and obs.turn > 0 and obs.events[-2][1] >= self.recommend_base

    def check_action(self, obs: Observation, action: int) -> None:
        super().check_action(obs, action)
        if self.is_terminal(obs):
            raise EpisodeOver("episode already finished")
        final = obs.turn == self.horizon - 1
        if action >= self.recommend_base:
            if not final and not self.variable_length:
                raise RecommendBeforeFinalTurn(f"recommendation at turn {obs.turn} of {self.horizon}")
        elif final:
            raise PolicyActionOutOfRange("the final turn requires a recommendation")

    # -- dynamics --

    def sample_response(self, obs: Observation, action: int, user: UserProfile, rng: random.Random) -> int:
        if action >= self.recommend_base:
            return ACK
        if action >= self.num_relevant:
            return DISTRACTOR_BASE + user.distractors[action - self.num_relevant]
        if self._noise > 0.0 and rng.random() < self._noise:
            return WITHHELD
        attr = self.askable[action]
        if attr == "injury":
            return INJURY_YES if user.injury else INJURY_NO
        if attr == "outdoor":
            return OUTDOORSY if user.outdoor == "outdoorsy" else INDOORSY
        if attr == "personality":
            return EXTROVERTED if user.personality == "extroverted" else INTROVERTED
        if attr == "ses":
            return {"low": SES_LOW, "medium": SES_MEDIUM, "high": SES_HIGH}[user.ses]
        return MOTIVATED if user.motivation == "high" else STRUGGLING

    def response_support(self, obs: Observation, action: int) -> tuple[int, ...]:
        if action >= self.recommend_base:
            return (ACK,)
        if action >= self.num_relevant:
            return tuple(DISTRACTOR_BASE + v for v in range(self.config.distractor_values))
        attr = self.askable[action]
        prev = _disclosed(obs, action)
        base = (prev,) if prev is not None else ATTRIBUTE_RESPONSES[attr]
        return base + ((WITHHELD,) if self._noise > 0.0 else ())

    def likelihood(self, obs: Observation, action: int, response: int, type_id: int) -> float:
        if action >= self.recommend_base:
            return 1.0 if response == ACK else 0.0
        if action >= self.num_relevant:
            v = response - DISTRACTOR_BASE
            return 1.0 / self.config.distractor_values if 0 <= v < self.config.distractor_values else 0.0
        if response == WITHHELD:
            return self._noise
        attr = self.askable[action]
        ans = RESPONSE_ANSWER.get(response)
        if ans is None or ans[0] != attr:
            return 0.0
        keep = 1.0 - self._noise
        prev = _disclosed(obs, action)
        if prev is not None:
            # answers are truthful, so a repeat must match the earlier disclosure
            return keep if response == prev else 0.0
        return keep * self.attribute_likelihood(attr, response, type_id)

    def attribute_likelihood(self, attr: str, response: int, type_id: int) -> float:
        """P(attribute reading | strategy) under independent attribute priors."""
        value = RESPONSE_ANSWER[response][1]
        required = STRATEGY_CONSTRAINTS[type_id].get(attr)
        if required is None:
            p_true = self._prior_true[attr]
            p = p_true if value else 1.0 - p_true
        else:
            p = 1.0 if value == required else 0.0
        if attr == "ses" and not value:
            p *= _SES_NOT_LOW_SPLIT[response]
        return p

    def summary_key(self, obs: Observation) -> tuple:
        """(turn, sorted disclosed relevant answers); drops order and distractor replies."""
        seen = set()
        for a, r in obs.exchanges():
            if a < self.num_relevant and r != WITHHELD:
                seen.add((a, r))
        return (obs.turn, tuple(sorted(seen)))

    def type_of(self, user: UserProfile) -> int:
        return ground_truth_strategy(user) - 1

    def type_reward(self, obs: Observation, action: int, type_id: int) -> float:
        if action >= self.recommend_base:
            return 1.0 if action - self.recommend_base == type_id else 0.0
        return 0.0

    def extrinsic_reward(self, trajectory: Trajectory) -> float:
        if not trajectory.turns:
            return 0.0
        last = trajectory.turns[-1].action
        if last < self.recommend_base:
            return 0.0
        return 1.0 if last - self.recommend_base == trajectory.user_type else 0.0

    # -- serialization --

    def user_to_record(self, user: UserProfile) -> dict:
        return user.to_record()

    def user_from_record(self, record: Mapping[str, Any]) -> UserProfile:
        return UserProfile.from_record(record)

    def describe(self) -> dict:
        return {"name": self.name, "config": self.config.to_record()}


def _disclosed(obs: Observation, action: int) -> int | None:
    """Earlier non-withheld response to the same question, if any."""
    ev = obs.events
    for i in range(0, len(ev), 2):
        if ev[i][1] == action and ev[i + 1][1] != WITHHELD:
            return ev[i + 1][1]
    return None


def question_histogram(env: ExerciseEnv, trajectories: Iterable[Trajectory]) -> list[int]:
    """Counts of each ask action across trajectories (relevant, then distractors)."""
    counts = [0] * env.recommend_base
    for traj in trajectories:
        for t in traj.turns:
            if t.action < env.recommend_base:
                counts[t.action] += 1
    return counts
