# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels.

Operation-for-operation mirror of ``_kernels_py``; compiled with
``-ffp-contract=off`` so results are bit-identical to the Python fallback.
"""

from libc.math cimport exp, log

from curiosity_lab.errors import ZeroEvidence

BACKEND = "cython"

cdef enum:
    MAXN = 512


cdef int _load(object seq, double* out, Py_ssize_t* n) except -1:
    cdef Py_ssize_t i, m
    cdef list lst
    cdef tuple tup
    if type(seq) is tuple:
        tup = <tuple>seq
        m = len(tup)
        if m > MAXN:
            raise ValueError("vector too long for compiled kernel")
        for i in range(m):
            out[i] = tup[i]
    elif type(seq) is list:
        lst = <list>seq
        m = len(lst)
        if m > MAXN:
            raise ValueError("vector too long for compiled kernel")
        for i in range(m):
            out[i] = lst[i]
    else:
        m = len(seq)
        if m > MAXN:
            raise ValueError("vector too long for compiled kernel")
        for i in range(m):
            out[i] = seq[i]
    n[0] = m
    return 0


cdef list _to_list(double* buf, Py_ssize_t n):
    cdef list tmp = [0.0] * n
    cdef Py_ssize_t i
    for i in range(n):
        tmp[i] = buf[i]
    return tmp


cdef tuple _to_tuple(double* buf, Py_ssize_t n):
    return tuple(_to_list(buf, n))


def normalize(weights):
    cdef double buf[MAXN]
    cdef Py_ssize_t n, i
    cdef double total = 0.0
    _load(weights, buf, &n)
    for i in range(n):
        total += buf[i]
    if total <= 0.0:
        raise ZeroEvidence("weights sum to zero")
    for i in range(n):
        buf[i] = buf[i] / total
    return _to_tuple(buf, n)


def belief_update(prior, likelihoods):
    cdef double b[MAXN]
    cdef double lik[MAXN]
    cdef Py_ssize_t n, m, i
    cdef double total = 0.0
    _load(prior, b, &n)
    _load(likelihoods, lik, &m)
    if n != m:
        raise ValueError("prior and likelihoods differ in length")
    for i in range(n):
        b[i] = b[i] * lik[i]
        total += b[i]
    if total <= 0.0:
        raise ZeroEvidence("observed response has zero probability under the belief")
    for i in range(n):
        b[i] = b[i] / total
    return _to_tuple(b, n)


def dot(a, b):
    cdef double x[MAXN]
    cdef double y[MAXN]
    cdef Py_ssize_t n, m, i
    cdef double total = 0.0
    _load(a, x, &n)
    _load(b, y, &m)
    for i in range(n):
        total += x[i] * y[i]
    return total


def entropy(probs):
    cdef double buf[MAXN]
    cdef Py_ssize_t n, i
    cdef double h = 0.0
    _load(probs, buf, &n)
    for i in range(n):
        if buf[i] > 0.0:
            h -= buf[i] * log(buf[i])
    return h


def kl_divergence(p, q, double floor):
    cdef double x[MAXN]
    cdef double y[MAXN]
    cdef Py_ssize_t n, m, i
    cdef double total = 0.0
    cdef double psum = 0.0
    cdef double qsum = 0.0
    cdef double qi
    cdef bint clamped = False
    _load(p, x, &n)
    _load(q, y, &m)
    for i in range(n):
        qi = y[i]
        if qi < floor:
            qi = floor
            clamped = True
        qsum += qi
        if x[i] > 0.0:
            psum += x[i]
            total += x[i] * log(x[i] / qi)
    if clamped:
        total += psum * log(qsum)
    return total


def temper(probs, double tau):
    cdef double buf[MAXN]
    cdef Py_ssize_t n, i
    cdef double inv = 1.0 / tau
    cdef double total = 0.0
    cdef double v
    _load(probs, buf, &n)
    for i in range(n):
        if buf[i] > 0.0:
            v = exp(inv * log(buf[i]))
            buf[i] = v
            total += v
        else:
            buf[i] = 0.0
    for i in range(n):
        buf[i] = buf[i] / total
    return _to_tuple(buf, n)


def masked_softmax(logits, tuple valid):
    cdef double lg[MAXN]
    cdef double out[MAXN]
    cdef Py_ssize_t n, k, i
    cdef Py_ssize_t a
    cdef double m, total = 0.0
    _load(logits, lg, &n)
    k = len(valid)
    m = lg[<Py_ssize_t>valid[0]]
    for i in range(k):
        a = valid[i]
        if lg[a] > m:
            m = lg[a]
    for i in range(k):
        a = valid[i]
        out[i] = exp(lg[a] - m)
        total += out[i]
    for i in range(k):
        out[i] = out[i] / total
    return _to_list(out, k)


def sample_index(probs, double u):
    cdef double buf[MAXN]
    cdef Py_ssize_t n, i, last
    cdef double acc = 0.0
    _load(probs, buf, &n)
    last = n - 1
    for i in range(last):
        acc += buf[i]
        if u < acc:
            return i
    return last


def accumulate_policy_grad(list grad, probs, tuple valid, Py_ssize_t pos, double scale):
    cdef double p[MAXN]
    cdef Py_ssize_t n, i, a
    cdef double g
    _load(probs, p, &n)
    for i in range(len(valid)):
        a = valid[i]
        g = grad[a]
        if i == pos:
            g += scale * (1.0 - p[i])
        else:
            g -= scale * p[i]
        grad[a] = g


def gae_propagate(rewards, values, double gamma, double lam):
    cdef double r[MAXN]
    cdef double v[MAXN]
    cdef double out[MAXN]
    cdef Py_ssize_t n, m, t
    cdef double boot = gamma * (1.0 - lam)
    cdef double decay = gamma * lam
    cdef double nxt = 0.0
    _load(rewards, r, &n)
    _load(values, v, &m)
    if m != n + 1:
        raise ValueError("values must have length len(rewards) + 1")
    for t in range(n - 1, -1, -1):
        nxt = r[t] + boot * v[t + 1] + decay * nxt
        out[t] = nxt
    return _to_list(out, n)


def discounted_returns(rewards, double gamma):
    cdef double r[MAXN]
    cdef double out[MAXN]
    cdef Py_ssize_t n, t
    cdef double acc = 0.0
    _load(rewards, r, &n)
    for t in range(n - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return _to_list(out, n)


def strategy_probs(double injury, double outdoor, double extroverted, double motivation, double low_ses):
    cdef double not_inj = 1.0 - injury
    cdef double indoor = 1.0 - outdoor
    cdef double intro = 1.0 - extroverted
    cdef double not_low = 1.0 - low_ses
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
