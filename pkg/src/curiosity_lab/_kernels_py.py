"""Pure-Python numeric kernels.

Reference implementation of the hot inner-loop routines. ``_kernels.pyx``
mirrors every function here operation-for-operation so both backends return
bit-identical floats; ``curiosity_lab.kernels`` picks one at import time.

Beliefs and distributions are plain tuples/lists of floats: at the sizes used
here (2-28 entries) list arithmetic beats numpy's per-call overhead.
"""

from math import exp, log

from curiosity_lab.errors import ZeroEvidence

BACKEND = "python"


def normalize(weights):
    total = 0.0
    for w in weights:
        total += w
    if total <= 0.0:
        raise ZeroEvidence("weights sum to zero")
    return tuple([w / total for w in weights])


def belief_update(prior, likelihoods):
    n = len(prior)
    if n != len(likelihoods):
        raise ValueError("prior and likelihoods differ in length")
    post = [0.0] * n
    total = 0.0
    for i in range(n):
        v = prior[i] * likelihoods[i]
        post[i] = v
        total += v
    if total <= 0.0:
        raise ZeroEvidence("observed response has zero probability under the belief")
    for i in range(n):
        post[i] = post[i] / total
    return tuple(post)


def dot(a, b):
    total = 0.0
    for i in range(len(a)):
        total += a[i] * b[i]
    return total


def entropy(probs):
    h = 0.0
    for p in probs:
        if p > 0.0:
            h -= p * log(p)
    return h


def kl_divergence(p, q, floor):
    """KL(p || q) with ``q`` clamped below at ``floor`` and renormalized; 0 log 0 := 0.

    Renormalizing only happens when some entry was clamped, so unclamped
    inputs give the plain sum and clamped ones still satisfy KL >= 0.
    """
    total = 0.0
    psum = 0.0
    qsum = 0.0
    clamped = False
    for i in range(len(p)):
        qi = q[i]
        if qi < floor:
            qi = floor
            clamped = True
        qsum += qi
        pi = p[i]
        if pi > 0.0:
            psum += pi
            total += pi * log(pi / qi)
    if clamped:
        total += psum * log(qsum)
    return total


def temper(probs, tau):
    inv = 1.0 / tau
    out = [0.0] * len(probs)
    total = 0.0
    for i in range(len(probs)):
        p = probs[i]
        if p > 0.0:
            v = exp(inv * log(p))
            out[i] = v
            total += v
    for i in range(len(out)):
        out[i] = out[i] / total
    return tuple(out)


def masked_softmax(logits, valid):
    """Softmax of ``logits`` restricted to the indices in ``valid``."""
    m = logits[valid[0]]
    for a in valid:
        if logits[a] > m:
            m = logits[a]
    out = [0.0] * len(valid)
    total = 0.0
    for i in range(len(valid)):
        v = exp(logits[valid[i]] - m)
        out[i] = v
        total += v
    for i in range(len(out)):
        out[i] = out[i] / total
    return out


def sample_index(probs, u):
    """Inverse-CDF draw from ``probs`` given a uniform ``u`` in [0, 1)."""
    acc = 0.0
    last = len(probs) - 1
    for i in range(last):
        acc += probs[i]
        if u < acc:
            return i
    return last


def accumulate_policy_grad(grad, probs, valid, pos, scale):
    """grad[valid[i]] += scale * (1{i == pos} - probs[i]), in place."""
    for i in range(len(valid)):
        if i == pos:
            grad[valid[i]] += scale * (1.0 - probs[i])
        else:
            grad[valid[i]] -= scale * probs[i]


def gae_propagate(rewards, values, gamma, lam):
    """Backward recursion r_hat[t] = r[t] + g(1-l)V[t+1] + g l r_hat[t+1]."""
    n = len(rewards)
    if len(values) != n + 1:
        raise ValueError("values must have length len(rewards) + 1")
    out = [0.0] * n
    boot = gamma * (1.0 - lam)
    decay = gamma * lam
    nxt = 0.0
    for t in range(n - 1, -1, -1):
        nxt = rewards[t] + boot * values[t + 1] + decay * nxt
        out[t] = nxt
    return out


def discounted_returns(rewards, gamma):
    n = len(rewards)
    out = [0.0] * n
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def strategy_probs(injury, outdoor, extroverted, motivation, low_ses):
    """Eight product-form strategy probabilities from per-attribute P(True)."""
    not_inj = 1.0 - injury
    indoor = 1.0 - outdoor
    intro = 1.0 - extroverted
    not_low = 1.0 - low_ses
    return (
        injury * outdoor,
        injury * indoor,
        not_inj * outdoor * intro,
        not_inj * outdoor * extroverted,
        not_inj * indoor * low_ses,
        not_inj * indoor * not_low * intro * motivation,
        not_inj * indoor * not_low * intro * (1.0 - motivation),
        not_inj * indoor * not_low * extroverted,
    )
