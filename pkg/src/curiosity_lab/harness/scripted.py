"""The fixed decision-tree questioner for the exercise task (the performance upper bound).

Ask injury, then outdoor. Injured users are done. Outdoorsy users get the
personality question. Everyone else is asked SES; low SES is done, otherwise
personality, and introverts are finally asked about motivation. In
fixed-length episodes the agent passes leftover turns with a filler question.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from curiosity_lab.core import ActionKind, AgentAction, Observation
from curiosity_lab.envs import exercise as ex
from curiosity_lab.user_model import AnswerSheet, AttributeAnswer, strategy_distribution


@dataclass
class ScriptedAgentState:
    counter: int = 0
    # relevant attribute -> boolean reading (True = injured / outdoorsy / extroverted / low SES / motivated)
    answers: dict[str, bool] = field(default_factory=dict)
    pending: str | None = None


def _decide(answers: dict[str, bool]) -> str | int:
    """Next attribute to ask, or the 1-indexed strategy to recommend."""
    if "injury" not in answers:
        return "injury"
    if "outdoor" not in answers:
        return "outdoor"
    if answers["injury"]:
        return 1 if answers["outdoor"] else 2
    if answers["outdoor"]:
        if "personality" not in answers:
            return "personality"
        return 4 if answers["personality"] else 3
    if "ses" not in answers:
        return "ses"
    if answers["ses"]:
        return 5
    if "personality" not in answers:
        return "personality"
    if answers["personality"]:
        return 8
    if "motivation" not in answers:
        return "motivation"
    return 6 if answers["motivation"] else 7


def _best_guess(answers: dict[str, bool]) -> int:
    sheet_vals = {ex.CLASSIFIER_KEY[a]: AttributeAnswer.TRUE if v else AttributeAnswer.FALSE for a, v in answers.items()}
    b = strategy_distribution(AnswerSheet(**sheet_vals))
    return max(range(len(b)), key=b.__getitem__) + 1


def scripted_next_action(state: ScriptedAgentState, last_response: int | None, env: ex.ExerciseEnv) -> AgentAction:
    """Record the reply to the pending question, then pick the next action (mutates ``state``)."""
    if state.pending is not None and last_response is not None:
        ans = ex.RESPONSE_ANSWER.get(last_response)
        if ans is not None and ans[0] == state.pending:
            state.answers[state.pending] = ans[1]
    state.pending = None
    step = _decide(state.answers)
    final = state.counter >= env.horizon - 1
    if isinstance(step, str) and (final or step not in env.askable):
        step = _best_guess(state.answers)
    state.counter += 1
    if not isinstance(step, str) and not final and not env.variable_length:
        # fixed-length episodes only accept the recommendation on the last turn
        return _filler(env)
    if isinstance(step, str):
        state.pending = step
        return AgentAction(env.ask_action(step), ActionKind.ASK)
    return AgentAction(env.recommend_action(step), ActionKind.RECOMMEND)


def _filler(env: ex.ExerciseEnv) -> AgentAction:
    """An uninformative question to pass a turn: a distractor, or a repeat if none exist."""
    if env.num_distractors:
        return AgentAction(env.distractor_action(0), ActionKind.ASK)
    return AgentAction(0, ActionKind.ASK)


class ScriptedAgent:
    """Policy adapter: rebuilds the agent state from the observation on every call."""

    def __init__(self, env: ex.ExerciseEnv) -> None:
        self.env = env

    def state_from(self, obs: Observation) -> ScriptedAgentState:
        state = ScriptedAgentState(counter=obs.turn)
        for a, r in obs.exchanges():
            attr = self.env.attribute_of(a)
            ans = ex.RESPONSE_ANSWER.get(r)
            if attr is not None and ans is not None and ans[0] == attr:
                state.answers[attr] = ans[1]
        return state

    def __call__(self, obs: Observation, valid: Sequence[int], rng: random.Random) -> int:
        return scripted_next_action(self.state_from(obs), None, self.env).id
