import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import beliefs
from curiosity_lab.errors import ConfigError
from curiosity_lab.shaping import (
    PotentialKind,
    ShapingConfig,
    ShapingKind,
    entropy,
    intrinsic_reward,
    kl_divergence,
    potential,
    shaped_reward,
)

CFG8 = ShapingConfig(0.95, 1e-6, 8)
CFG2 = ShapingConfig(0.95, 1e-6, 2)


class TestPotentials:
    def test_negent_uniform8(self):
        assert potential(PotentialKind.NEGENT, [1 / 8] * 8, 0) == pytest.approx(-math.log(8))
        assert potential(PotentialKind.NEGENT, [1 / 8] * 8, 0) == pytest.approx(-2.0794, abs=1e-4)

    def test_acc_certain(self):
        assert potential(PotentialKind.ACC, [1, 0], 0) == 1

    def test_logacc_hand(self):
        assert potential(PotentialKind.LOGACC, [0.25, 0.75], 1) == pytest.approx(-0.28768, abs=1e-5)

    def test_logacc_floor(self):
        assert potential(PotentialKind.LOGACC, [1.0, 0.0], 1, 1e-6) == pytest.approx(math.log(1e-6))

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    def test_logacc_monotone(self, x, y):
        lo, hi = sorted((x, y))
        assert potential(PotentialKind.LOGACC, [lo, 1 - lo], 0) <= potential(PotentialKind.LOGACC, [hi, 1 - hi], 0)


class TestEntropyKL:
    def test_entropy_values(self):
        assert entropy([1.0, 0.0]) == 0.0
        assert entropy([0.5, 0.5]) == pytest.approx(0.6931, abs=1e-4)
        assert entropy([0.9, 0.1]) == pytest.approx(0.3251, abs=1e-4)

    def test_kl_values(self):
        assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))

    @given(beliefs(2, 2), beliefs(2, 2))
    def test_kl_nonnegative(self, p, q):
        assert kl_divergence(p, q) >= -1e-12


class TestIntrinsic:
    def test_diffacc_hand(self):
        r = intrinsic_reward(ShapingKind.DIFFACC, [0.25, 0.75], [0.5, 0.5], 0, CFG2)
        assert r == pytest.approx(0.225)

    def test_ent_uniform_is_zero(self):
        assert intrinsic_reward(ShapingKind.ENT, [1 / 8] * 8, [1 / 8] * 8, 3, CFG8) == pytest.approx(0.0, abs=1e-12)

    def test_infogain_unchanged(self):
        b = [0.1, 0.2, 0.7]
        assert intrinsic_reward(ShapingKind.INFOGAIN, b, b, 0, ShapingConfig(0.95, 1e-6, 3)) == 0.0

    @given(beliefs(8, 8), beliefs(8, 8), st.integers(0, 7))
    def test_ranges(self, b0, b1, u):
        ent = intrinsic_reward(ShapingKind.ENT, b0, b1, u, CFG8)
        acc = intrinsic_reward(ShapingKind.ACC, b0, b1, u, CFG8)
        ig = intrinsic_reward(ShapingKind.INFOGAIN, b0, b1, u, CFG8)
        assert -1e-12 <= ent <= math.log(8) + 1e-12
        assert -1 / 8 - 1e-12 <= acc <= 1 - 1 / 8 + 1e-12
        assert ig >= -1e-12

    @given(beliefs(2, 6, min_mass=1e-3), beliefs(2, 6, min_mass=1e-3), st.floats(0.0, 1.0), st.data())
    def test_diff_equals_shaped_with_zero_base(self, b0, b1, gamma, data):
        if len(b0) != len(b1):
            return
        u = data.draw(st.integers(0, len(b0) - 1))
        cfg = ShapingConfig(gamma, 1e-6, len(b0))
        for kind in (ShapingKind.DIFFACC, ShapingKind.DIFFLOGACC, ShapingKind.DIFFENT):
            assert intrinsic_reward(kind, b0, b1, u, cfg) == shaped_reward(0.0, b0, b1, kind.potential, u, cfg)

    def test_potential_flag(self):
        assert {k for k in ShapingKind if k.potential_based} == {
            ShapingKind.DIFFACC, ShapingKind.DIFFLOGACC, ShapingKind.DIFFENT}

    def test_parse(self):
        assert ShapingKind.parse("DiffAcc") is ShapingKind.DIFFACC
        with pytest.raises(ConfigError):
            ShapingKind.parse("bogus")


class TestShapedReward:
    def test_constant_potential(self):
        assert shaped_reward(0.0, [0.4, 0.6], [0.4, 0.6], PotentialKind.ACC, 0, ShapingConfig(1.0, 1e-6, 2)) == 0.0

    def test_no_belief_change_gamma1(self):
        assert shaped_reward(1.0, [0.5, 0.5], [0.5, 0.5], PotentialKind.ACC, 0, ShapingConfig(1.0, 1e-6, 2)) == 1.0

    def test_hand_value(self):
        b0 = [0.125] + [0.875 / 7] * 7
        b1 = [0.8] + [0.2 / 7] * 7
        r = shaped_reward(0.5, b0, b1, PotentialKind.ACC, 0, CFG8)
        assert r == pytest.approx(1.135)


def test_config_validation():
    with pytest.raises(ConfigError):
        ShapingConfig(1.5, 1e-6, 8)
    with pytest.raises(ConfigError):
        ShapingConfig(0.9, 0.5, 8)
    with pytest.raises(ConfigError):
        ShapingConfig(0.9, 1e-6, 1)


def test_telescoping_random_episodes():
    rng = random.Random(0)
    cfg = ShapingConfig(1.0, 1e-6, 4)
    for _ in range(200):
        seq = []
        for _ in range(rng.randint(1, 8)):
            w = [rng.random() + 1e-3 for _ in range(4)]
            seq.append(tuple(x / sum(w) for x in w))
        u = rng.randrange(4)
        for kind in (ShapingKind.DIFFACC, ShapingKind.DIFFLOGACC, ShapingKind.DIFFENT):
            total = math.fsum(intrinsic_reward(kind, a, b, u, cfg) for a, b in zip(seq, seq[1:]))
            phi = kind.potential
            want = potential(phi, seq[-1], u) - potential(phi, seq[0], u)
            assert total == pytest.approx(want, abs=1e-9)
