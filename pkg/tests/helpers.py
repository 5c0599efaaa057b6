"""Independent oracles shared by unit and acceptance tests."""

import math
import random

from curiosity_lab.trainer import EpisodeSample, PolicyTable, log_likelihood_objective, policy_gradient


def gae_direct(rewards, values, gamma, lam):
    """r_hat_t = sum_{t' >= t} (gamma lam)^(t'-t) [r_t' + gamma (1 - lam) V(s_t'+1)], evaluated term by term."""
    n = len(rewards)
    out = []
    for t in range(n):
        total = 0.0
        for tp in range(t, n):
            total += (gamma * lam) ** (tp - t) * (rewards[tp] + gamma * (1.0 - lam) * values[tp + 1])
        out.append(total)
    return out


def discounted_return(rewards, gamma):
    return [sum(gamma ** (k - t) * rewards[k] for k in range(t, len(rewards))) for t in range(len(rewards))]


def random_gradient_case(seed, num_actions=3, samples=6, eps=1e-5):
    """One random tabular state: (analytic gradient row, central-difference row)."""
    rng = random.Random(seed)
    key = ("state", seed)
    valid = tuple(range(num_actions))
    policy = PolicyTable(num_actions, {key: [rng.gauss(0.0, 1.5) for _ in range(num_actions)]})
    batch = []
    for _ in range(samples):
        probs = policy.probs(key, valid)
        batch.append(EpisodeSample([key], [valid], [probs], [rng.randrange(num_actions)], [0.0],
                                   rhat=[rng.uniform(-2.0, 2.0)]))
    analytic = policy_gradient(batch, num_actions).get(key, [0.0] * num_actions)
    numeric = []
    row = policy.logits[key]
    for a in range(num_actions):
        orig = row[a]
        row[a] = orig + eps
        up = log_likelihood_objective(policy, batch)
        row[a] = orig - eps
        down = log_likelihood_objective(policy, batch)
        row[a] = orig
        numeric.append((up - down) / (2 * eps))
    return analytic, numeric


def relative_error(a, b):
    num = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    den = max(math.sqrt(sum(y * y for y in b)), 1e-8)
    return num / den


# (injury, outdoorsy, extroverted, motivated, ses) -> strategy, written out by hand from the rules
TRUTH_ROWS = []
for inj in (True, False):
    for out in (True, False):
        for ext in (True, False):
            for mot in (True, False):
                for ses in ("low", "medium", "high"):
                    if inj:
                        s = 1 if out else 2
                    elif out:
                        s = 4 if ext else 3
                    elif ses == "low":
                        s = 5
                    elif ext:
                        s = 8
                    else:
                        s = 6 if mot else 7
                    TRUTH_ROWS.append((inj, out, ext, mot, ses, s))
