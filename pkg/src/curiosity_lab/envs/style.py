"""Style-Teaching: a two-type teaching task whose reward ignores the student.

The student prefers either story telling or hands-on activities. The agent
can ask about the preference, teach in either style, teach in a merged style
that matches neither, or make small talk. Students sometimes volunteer their
preference without being asked. The extrinsic reward counts teaching moves
and never looks at the student's type.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass

from curiosity_lab.core import ActionKind, EnvironmentSpec, Observation, Trajectory
from curiosity_lab.errors import ConfigError, EpisodeOver

STORY, HANDS_ON = 0, 1
TYPE_LABELS = ("story", "hands_on")

ASK_PREFERENCE = 0
TEACH_STORY = 1
TEACH_HANDS_ON = 2
TEACH_MERGE = 3
SMALLTALK = 4
END_EPISODE = 5
ACTION_LABELS = ("ask_preference", "teach_story", "teach_hands_on", "teach_merge", "smalltalk", "end_episode")
TEACH_ACTIONS = (TEACH_STORY, TEACH_HANDS_ON, TEACH_MERGE)
MATCHING_TEACH = {STORY: TEACH_STORY, HANDS_ON: TEACH_HANDS_ON}

# responses
PREFERS_STORY = 0
PREFERS_HANDS_ON = 1
NEUTRAL = 2
DISCLOSURE = {STORY: PREFERS_STORY, HANDS_ON: PREFERS_HANDS_ON}


@dataclass(frozen=True)
class StyleEnvConfig:
    horizon: int = 10
    spontaneous_reveal_prob: float = 0.3
    merge_action_bonus: float = 0.0
    per_teach_quality: float = 1.0
    variable_length: bool = False

    def __post_init__(self) -> None:
        if self.horizon < 2:
            raise ConfigError("style horizon must be >= 2")
        if not 0.0 <= self.spontaneous_reveal_prob <= 1.0:
            raise ConfigError("spontaneous_reveal_prob must lie in [0, 1]")

    def to_record(self) -> dict:
        return asdict(self)


class StyleEnv(EnvironmentSpec):
    name = "style"

    def __init__(self, config: StyleEnvConfig | None = None) -> None:
        self.config = config or StyleEnvConfig()
        self.horizon = self.config.horizon
        self.variable_length = self.config.variable_length
        self._valid = tuple(range(6 if self.variable_length else 5))
        self._reveal = self.config.spontaneous_reveal_prob

    @property
    def num_actions(self) -> int:
        return len(self._valid)

    @property
    def type_labels(self) -> tuple[str, ...]:
        return TYPE_LABELS

    def action_kind(self, action: int) -> ActionKind:
        return ActionKind.ASK if action == ASK_PREFERENCE else ActionKind.ACT

    def action_label(self, action: int) -> str:
        return ACTION_LABELS[action]

    def valid_actions(self, obs: Observation) -> tuple[int, ...]:
        return self._valid

    def is_terminal(self, obs: Observation) -> bool:
        if obs.turn >= self.horizon:
            return True
        return self.variable_length and obs.turn > 0 and obs.events[-2][1] == END_EPISODE

    def check_action(self, obs: Observation, action: int) -> None:
        super().check_action(obs, action)
        if self.is_terminal(obs):
            raise EpisodeOver("episode already finished")

    def sample_response(self, obs: Observation, action: int, user: int, rng: random.Random) -> int:
        if action == END_EPISODE:
            return NEUTRAL
        if action == ASK_PREFERENCE:
            return DISCLOSURE[user]
        if self._reveal > 0.0 and rng.random() < self._reveal:
            return DISCLOSURE[user]
        return NEUTRAL

    def response_support(self, obs: Observation, action: int) -> tuple[int, ...]:
        if action == END_EPISODE:
            return (NEUTRAL,)
        if action == ASK_PREFERENCE:
            return (PREFERS_STORY, PREFERS_HANDS_ON)
        return (PREFERS_STORY, PREFERS_HANDS_ON, NEUTRAL)

    def likelihood(self, obs: Observation, action: int, response: int, type_id: int) -> float:
        if action == END_EPISODE:
            return 1.0 if response == NEUTRAL else 0.0
        own = DISCLOSURE[type_id]
        if action == ASK_PREFERENCE:
            return 1.0 if response == own else 0.0
        if response == NEUTRAL:
            return 1.0 - self._reveal
        return self._reveal if response == own else 0.0

    def summary_key(self, obs: Observation) -> tuple[int, int]:
        """(turn, disclosed style or -1): what a teacher needs to remember."""
        for _, r in obs.exchanges():
            if r != NEUTRAL:
                return obs.turn, r
        return obs.turn, -1

    def type_of(self, user: int) -> int:
        return int(user)

    def type_reward(self, obs: Observation, action: int, type_id: int) -> float:
        return self.action_reward(action)

    def action_reward(self, action: int) -> float:
        cfg = self.config
        if action == TEACH_MERGE:
            return cfg.per_teach_quality + cfg.merge_action_bonus
        if action in (TEACH_STORY, TEACH_HANDS_ON):
            return cfg.per_teach_quality
        return 0.0

    def extrinsic_reward(self, trajectory: Trajectory) -> float:
        return style_extrinsic_reward(trajectory, self.config)

    def describe(self) -> dict:
        return {"name": self.name, "config": self.config.to_record()}


def style_extrinsic_reward(trajectory: Trajectory, cfg: StyleEnvConfig) -> float:
    """Conversation-level score: teaching moves plus the merge bonus, whatever the student."""
    total = 0.0
    for t in trajectory.turns:
        if t.action == TEACH_MERGE:
            total += cfg.per_teach_quality + cfg.merge_action_bonus
        elif t.action in (TEACH_STORY, TEACH_HANDS_ON):
            total += cfg.per_teach_quality
    return total


def personalization_score(trajectory: Trajectory, user_type: int) -> float:
    """Fraction of teaching moves in the student's own style; merged moves never match."""
    teach = 0
    match = 0
    target = MATCHING_TEACH[user_type]
    for t in trajectory.turns:
        if t.action in TEACH_ACTIONS:
            teach += 1
            if t.action == target:
                match += 1
    return match / teach if teach else 0.0
