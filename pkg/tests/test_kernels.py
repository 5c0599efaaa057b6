import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import beliefs
from curiosity_lab import _kernels_py as py
from curiosity_lab import kernels
from curiosity_lab.errors import ZeroEvidence

try:
    from curiosity_lab import _kernels as cy
except ImportError:  # pragma: no cover - compiled build absent
    cy = None

needs_cy = pytest.mark.skipif(cy is None, reason="compiled kernels not built")
floats = st.floats(-20.0, 20.0, allow_nan=False)


def test_backend_selected():
    assert kernels.BACKEND in ("python", "cython")
    if cy is not None:
        assert kernels.BACKEND == "cython"


@needs_cy
class TestParity:
    """Both backends must return bit-identical results."""

    @given(beliefs(), st.data())
    def test_belief_update(self, b, data):
        lik = data.draw(st.lists(st.floats(0.0, 1.0), min_size=len(b), max_size=len(b)))
        try:
            want = py.belief_update(b, lik)
        except ZeroEvidence:
            with pytest.raises(ZeroEvidence):
                cy.belief_update(b, lik)
            return
        assert cy.belief_update(b, lik) == want

    @given(beliefs(), beliefs())
    def test_entropy_kl_dot(self, p, q):
        assert cy.entropy(p) == py.entropy(p)
        if len(p) == len(q):
            assert cy.kl_divergence(p, q, 1e-6) == py.kl_divergence(p, q, 1e-6)
            assert cy.dot(p, q) == py.dot(p, q)

    @given(beliefs(), st.floats(0.1, 10.0))
    def test_temper(self, b, tau):
        assert cy.temper(b, tau) == py.temper(b, tau)

    @given(st.lists(floats, min_size=2, max_size=28), st.data())
    def test_masked_softmax(self, logits, data):
        valid = tuple(sorted(data.draw(st.sets(st.integers(0, len(logits) - 1), min_size=1))))
        assert cy.masked_softmax(logits, valid) == py.masked_softmax(logits, valid)

    @given(beliefs(), st.floats(0.0, 0.999999))
    def test_sample_index(self, p, u):
        assert cy.sample_index(p, u) == py.sample_index(p, u)

    @given(st.lists(floats, min_size=1, max_size=12), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.data())
    def test_gae_and_returns(self, rewards, gamma, lam, data):
        values = data.draw(st.lists(floats, min_size=len(rewards), max_size=len(rewards))) + [0.0]
        assert cy.gae_propagate(rewards, values, gamma, lam) == py.gae_propagate(rewards, values, gamma, lam)
        assert cy.discounted_returns(rewards, gamma) == py.discounted_returns(rewards, gamma)

    @given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5))
    def test_strategy_probs(self, attrs):
        assert cy.strategy_probs(*attrs) == py.strategy_probs(*attrs)

    @given(beliefs(), st.data(), st.floats(-5.0, 5.0))
    def test_accumulate_policy_grad(self, probs, data, scale):
        n = len(probs)
        valid = tuple(range(n))
        pos = data.draw(st.integers(0, n - 1))
        g1 = [0.0] * (n + 2)
        g2 = [0.0] * (n + 2)
        py.accumulate_policy_grad(g1, probs, valid, pos, scale)
        cy.accumulate_policy_grad(g2, probs, valid, pos, scale)
        assert g1 == g2


@pytest.mark.parametrize("mod", [py] + ([cy] if cy is not None else []), ids=lambda m: m.BACKEND)
class TestKernelValues:
    def test_entropy_uniform(self, mod):
        assert mod.entropy([0.5, 0.5]) == pytest.approx(math.log(2))
        assert mod.entropy([1.0, 0.0]) == 0.0

    def test_masked_softmax_masks(self, mod):
        p = mod.masked_softmax([1.0, 50.0, 2.0], (0, 2))
        assert sum(p) == pytest.approx(1.0)
        assert len(p) == 2
        assert p[1] > p[0]

    def test_masked_softmax_extreme_logits(self, mod):
        p = mod.masked_softmax([1000.0, -1000.0], (0, 1))
        assert p[0] == pytest.approx(1.0) and p[1] >= 0.0

    def test_normalize_zero(self, mod):
        with pytest.raises(ZeroEvidence):
            mod.normalize([0.0, 0.0])

    def test_sample_index_boundaries(self, mod):
        assert mod.sample_index([0.25, 0.75], 0.0) == 0
        assert mod.sample_index([0.25, 0.75], 0.2499) == 0
        assert mod.sample_index([0.25, 0.75], 0.25) == 1
        assert mod.sample_index([0.25, 0.75], 0.999999) == 1
