"""Exhaustive belief-MDP enumeration and exact optimal-policy solves.

Nodes are reachable conversation prefixes with their exact Bayes beliefs. An
edge (node, action) carries the belief-expected base reward and a distribution
over child nodes, one per possible user response.

Potentials that mention the true type enter the belief MDP through their
posterior expectation, Phi(b) = sum_u b(u) phi(b, u): for accuracy this is
sum_u b(u)^2, for log-accuracy sum_u b(u) log max(b(u), floor). Because the
expectation of gamma * phi(b', u) - phi(b, u) over the type and the response
is exactly gamma * E[Phi(b')] - Phi(b), shaping the user-conditioned process
with phi is the same as shaping the belief MDP with Phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from curiosity_lab import kernels
from curiosity_lab.core import Belief, EnvironmentSpec, Observation, belief_update, expected_reward
from curiosity_lab.errors import StateSpaceCapExceeded
from curiosity_lab.shaping import PotentialKind, ShapingConfig, ShapingKind, intrinsic_reward

DEFAULT_CAP = 1_000_000
TIE_TOL = 1e-9


@dataclass
class Edge:
    action: int
    reward: float
    # (probability, child index, response)
    outcomes: list[tuple[float, int, int]]


@dataclass
class Node:
    obs: Observation
    belief: Belief
    turn: int
    edges: list[Edge] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return not self.edges


@dataclass
class FiniteBeliefMDP:
    nodes: list[Node]
    horizon: int
    num_types: int

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> Node:
        return self.nodes[0]


def enumerate_belief_mdp(env: EnvironmentSpec, prior: Sequence[float], horizon: int | None = None,
                         cap: int = DEFAULT_CAP) -> FiniteBeliefMDP:
    """Breadth-first expansion of every reachable (observation, belief) node."""
    horizon = env.horizon if horizon is None else horizon
    n_types = env.num_types
    root = Node(env.initial_observation(), tuple(prior), 0)
    nodes = [root]
    frontier = [0]
    while frontier:
        nxt_frontier = []
        for idx in frontier:
            node = nodes[idx]
            obs, b = node.obs, node.belief
            if node.turn >= horizon or env.is_terminal(obs):
                continue
            for a in env.valid_actions(obs):
                rewards = [env.type_reward(obs, a, u) for u in range(n_types)]
                edge = Edge(a, expected_reward(b, rewards), [])
                for o in env.response_support(obs, a):
                    lik = env.likelihood_vector(obs, a, o)
                    p = kernels.dot(b, lik)
                    if p <= 0.0:
                        continue
                    child = Node(obs.extend(a, o), belief_update(b, lik), node.turn + 1)
                    nodes.append(child)
                    if len(nodes) > cap:
                        raise StateSpaceCapExceeded(f"more than {cap} belief nodes")
                    edge.outcomes.append((p, len(nodes) - 1, o))
                    nxt_frontier.append(len(nodes) - 1)
                node.edges.append(edge)
        frontier = nxt_frontier
    return FiniteBeliefMDP(nodes, horizon, n_types)


def belief_potential(kind: PotentialKind, b: Sequence[float], prob_floor: float = 1e-6) -> float:
    """Posterior expectation of the type-conditioned potential."""
    if kind is PotentialKind.ACC:
        return sum(p * p for p in b)
    if kind is PotentialKind.LOGACC:
        return sum(p * math.log(max(p, prob_floor)) for p in b if p > 0.0)
    if kind is PotentialKind.NEGENT:
        return -kernels.entropy(b)
    raise ValueError(f"unknown potential {kind!r}")


def expected_intrinsic(kind: ShapingKind, b: Belief, b_next: Belief, cfg: ShapingConfig) -> float:
    """E over the true type given the child belief: sum_u b'(u) r_int(b, b', u)."""
    total = 0.0
    for u, w in enumerate(b_next):
        if w > 0.0:
            total += w * intrinsic_reward(kind, b, b_next, u, cfg)
    return total


@dataclass
class Solution:
    values: list[float]
    q: list[dict[int, float]]
    optimal: list[frozenset[int]]


def solve_optimal(
    mdp: FiniteBeliefMDP,
    shaping: PotentialKind | None = None,
    gamma: float = 0.95,
    prob_floor: float = 1e-6,
    terminal_potential: str = "zero",
    injected: ShapingKind | None = None,
    injected_weight: float = 1.0,
    tie_tol: float = TIE_TOL,
) -> Solution:
    """Backward induction; ``optimal`` holds every action within ``tie_tol`` of the best Q.

    With a potential, each transition earns gamma * Phi(b') - Phi(b) on top of
    the base reward. ``terminal_potential="zero"`` sets Phi to 0 at terminal
    nodes (the episodic convention); ``"keep"`` uses the leaf belief's Phi.
    ``injected`` adds an arbitrary intrinsic reward, weighted, per transition.
    """
    if terminal_potential not in ("zero", "keep"):
        raise ValueError("terminal_potential must be 'zero' or 'keep'")
    nodes = mdp.nodes
    n = len(nodes)
    phi = [0.0] * n
    if shaping is not None:
        for i, node in enumerate(nodes):
            if node.terminal and terminal_potential == "zero":
                continue
            phi[i] = belief_potential(shaping, node.belief, prob_floor)
    scfg = ShapingConfig(gamma, prob_floor, mdp.num_types) if injected is not None else None
    values = [0.0] * n
    qs: list[dict[int, float]] = [{} for _ in range(n)]
    optimal: list[frozenset[int]] = [frozenset()] * n
    for i in range(n - 1, -1, -1):
        node = nodes[i]
        if node.terminal:
            continue
        q = qs[i]
        for edge in node.edges:
            total = edge.reward
            for p, c, _ in edge.outcomes:
                r = gamma * values[c]
                if shaping is not None:
                    r += gamma * phi[c] - phi[i]
                if injected is not None:
                    r += injected_weight * expected_intrinsic(injected, node.belief, nodes[c].belief, scfg)
                total += p * r
            q[edge.action] = total
        best = max(q.values())
        values[i] = best
        optimal[i] = frozenset(a for a, v in q.items() if v >= best - tie_tol)
    return Solution(values, qs, optimal)


@dataclass
class InvarianceReport:
    num_states: int
    max_value_shift: float
    argmax_sets_equal: bool
    counterexamples: list[dict]
    telescoping_error: float = 0.0

    def to_record(self) -> dict:
        return {
            "num_states": self.num_states,
            "max_value_shift": self.max_value_shift,
            "argmax_sets_equal": self.argmax_sets_equal,
            "telescoping_error": self.telescoping_error,
            "counterexamples": self.counterexamples,
        }


def _leaf_potential(mdp: FiniteBeliefMDP, sol: Solution, kind: PotentialKind, gamma: float,
                    prob_floor: float) -> list[float]:
    """gamma^(steps to leaf) * E[Phi(leaf)] following the lowest-id optimal action."""
    nodes = mdp.nodes
    out = [0.0] * len(nodes)
    for i in range(len(nodes) - 1, -1, -1):
        node = nodes[i]
        if node.terminal:
            out[i] = belief_potential(kind, node.belief, prob_floor)
            continue
        a = min(sol.optimal[i])
        edge = next(e for e in node.edges if e.action == a)
        out[i] = gamma * sum(p * out[c] for p, c, _ in edge.outcomes)
    return out


def check_pbrs_invariance(
    mdp: FiniteBeliefMDP,
    potential: PotentialKind | None,
    gamma: float,
    prob_floor: float = 1e-6,
    terminal_potential: str = "zero",
    injected: ShapingKind | None = None,
    injected_weight: float = 1.0,
    tie_tol: float = TIE_TOL,
    max_counterexamples: int = 50,
) -> InvarianceReport:
    """Compare optimal-action sets with and without shaping at every node.

    The telescoping check verifies V_shaped(n) - V(n) = -Phi(n) + gamma^(H-t) E[Phi(leaf)]
    (the leaf term vanishes under the zero terminal convention).
    """
    base = solve_optimal(mdp, None, gamma, prob_floor, tie_tol=tie_tol)
    shaped = solve_optimal(mdp, potential, gamma, prob_floor, terminal_potential,
                           injected, injected_weight, tie_tol)
    counter: list[dict] = []
    mismatched = 0
    shift = 0.0
    for i, node in enumerate(mdp.nodes):
        if node.terminal:
            continue
        shift = max(shift, abs(shaped.values[i] - base.values[i]))
        if base.optimal[i] != shaped.optimal[i]:
            mismatched += 1
            if len(counter) < max_counterexamples:
                counter.append({
                    "turn": node.turn,
                    "events": [list(e) for e in node.obs.events],
                    "belief": list(node.belief),
                    "optimal_unshaped": sorted(base.optimal[i]),
                    "optimal_shaped": sorted(shaped.optimal[i]),
                })
    tele = 0.0
    if potential is not None and injected is None:
        leaf = [0.0] * len(mdp.nodes)
        if terminal_potential == "keep":
            leaf = _leaf_potential(mdp, shaped, potential, gamma, prob_floor)
        for i, node in enumerate(mdp.nodes):
            if node.terminal:
                continue
            expect = -belief_potential(potential, node.belief, prob_floor) + leaf[i]
            tele = max(tele, abs(shaped.values[i] - base.values[i] - expect))
    return InvarianceReport(
        num_states=len(mdp.nodes),
        max_value_shift=shift,
        argmax_sets_equal=mismatched == 0,
        counterexamples=counter,
        telescoping_error=tele,
    )


# -- canonical verification instances --------------------------------------

TOY_SEEDS = tuple(range(20))


def reduced_exercise_mdp(cap: int = DEFAULT_CAP) -> FiniteBeliefMDP:
    """Three askable binary attributes, horizon 4, one two-valued distractor.

    SES and motivation are pinned (not low SES, motivated) so the prior puts
    mass only on strategies the three questions can separate.
    """
    from curiosity_lab.envs.exercise import ExerciseEnv, ExerciseEnvConfig
    from curiosity_lab.user_model import StrategyClassifierEngine

    env = ExerciseEnv(ExerciseEnvConfig(horizon=4, askable=("injury", "outdoor", "personality"),
                                        num_distractor_questions=1, distractor_values=2))
    prior = StrategyClassifierEngine(env, fixed={"ses": False, "motivation": True}).prior()
    return enumerate_belief_mdp(env, prior, cap=cap)


def toy_mdp(seed: int, cap: int = DEFAULT_CAP) -> FiniteBeliefMDP:
    """Random two-type toy POMDP under a uniform prior."""
    from curiosity_lab.envs.toy import random_toy_pomdp

    return enumerate_belief_mdp(random_toy_pomdp(seed), (0.5, 0.5), cap=cap)
