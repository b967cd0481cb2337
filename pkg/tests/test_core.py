import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrrsched.core import (
    Clock,
    ExpiredError,
    Packet,
    RateMatrix,
    adjusted_min_rate,
    effective_rate_after_puncture,
    is_expired,
    min_rate,
    reward_rate,
    time_to_expiry,
)


def make_packet(**kw):
    base = dict(id=1, arrival=0, expiry=10, subscriber=0, length_bits=800,
                reward=4.0, urllc=False)
    base.update(kw)
    return Packet(**base)


class TestTypes:
    def test_clock_defaults(self):
        c = Clock()
        assert c.now == 0 and c.subframes_per_frame == 10
        c.advance(25)
        assert c.frame == 2

    def test_clock_rejects_negative_start(self):
        with pytest.raises(ValueError):
            Clock(now=-1)

    def test_packet_invariants(self):
        with pytest.raises(ValueError):
            make_packet(expiry=0)
        with pytest.raises(ValueError):
            make_packet(length_bits=0)
        with pytest.raises(ValueError):
            make_packet(reward=-1.0)

    def test_time_to_expiry(self):
        pkt = make_packet(expiry=12)
        assert time_to_expiry(pkt, 5) == 7
        assert not is_expired(pkt, 11)
        assert is_expired(pkt, 12)

    def test_rate_matrix_shape(self):
        m = RateMatrix(np.ones((3, 4)))
        assert m.n_subscribers == 3 and m.n_rbs == 4
        with pytest.raises(ValueError):
            RateMatrix(-np.ones((2, 2)))


class TestMinRate:
    def test_basic(self):
        assert min_rate(100, 15, 10) == 20

    def test_one_subframe_left(self):
        assert min_rate(100, 11, 10) == 100

    def test_expired_boundary(self):
        with pytest.raises(ExpiredError):
            min_rate(100, 10, 10)

    @given(l=st.integers(1, 10_000), e=st.integers(1, 500), t=st.integers(0, 499))
    @settings(max_examples=100)
    def test_strictly_decreasing_in_window(self, l, e, t):
        if e - t < 2:
            return
        assert min_rate(l, e, t) < min_rate(l, e - 1, t)


class TestAdjustedMinRate:
    def test_slack_branch(self):
        assert adjusted_min_rate(100, 5, slack=True) == 20

    def test_tightened_branch(self):
        assert adjusted_min_rate(100, 5, slack=False) == pytest.approx(100 / 3)

    def test_infeasible_branch(self):
        assert math.isinf(adjusted_min_rate(100, 2, slack=False))

    @given(l=st.integers(1, 10_000), d=st.integers(3, 400))
    @settings(max_examples=100)
    def test_tightened_dominates_slack(self, l, d):
        assert adjusted_min_rate(l, d, slack=False) >= adjusted_min_rate(l, d, slack=True)


class TestRewardRate:
    def test_spec_arithmetic(self):
        assert reward_rate(4, 2, np.array([1, 0, 1]), np.array([3, 5, 7])) == 20

    def test_zero_allocation(self):
        assert reward_rate(1, 1, np.zeros(4), np.arange(4.0)) == 0

    def test_fractional(self):
        assert reward_rate(1, 1, np.array([0.5]), np.array([10.0])) == 5

    @given(st.data())
    @settings(max_examples=60)
    def test_linear_in_allocation(self, data):
        k = data.draw(st.integers(1, 6))
        fl = st.floats(0, 1, allow_nan=False)
        x1 = np.array(data.draw(st.lists(fl, min_size=k, max_size=k)))
        x2 = np.array(data.draw(st.lists(fl, min_size=k, max_size=k)))
        r = np.array(data.draw(st.lists(st.floats(0, 100), min_size=k, max_size=k)))
        a = data.draw(st.floats(0, 1))
        mixed = reward_rate(3, 7, a * x1 + (1 - a) * x2, r)
        split = a * reward_rate(3, 7, x1, r) + (1 - a) * reward_rate(3, 7, x2, r)
        assert mixed == pytest.approx(split, rel=1e-9, abs=1e-9)


class TestEffectiveRate:
    def test_proportional_loss(self):
        out = effective_rate_after_puncture(
            np.array([10.0, 10.0]), [(np.array([1, 0]), 2)], 10)
        np.testing.assert_allclose(out, [8.0, 10.0])

    def test_identity_without_punctures(self):
        np.testing.assert_allclose(
            effective_rate_after_puncture(np.array([10.0]), [], 10), [10.0])

    def test_full_puncture(self):
        np.testing.assert_allclose(
            effective_rate_after_puncture(np.array([10.0]), [(np.array([1]), 10)], 10),
            [0.0])

    @given(st.data())
    @settings(max_examples=60)
    def test_never_exceeds_nominal(self, data):
        k = data.draw(st.integers(1, 5))
        d = data.draw(st.integers(1, 20))
        r = np.array(data.draw(st.lists(st.floats(0, 1000), min_size=k, max_size=k)))
        n_punct = data.draw(st.integers(0, 3))
        punctures = []
        free = list(range(k))
        for _ in range(min(n_punct, len(free))):
            rb = data.draw(st.sampled_from(free))
            free.remove(rb)
            x = np.zeros(k)
            x[rb] = 1
            punctures.append((x, data.draw(st.integers(1, d))))
        out = effective_rate_after_puncture(r, punctures, d)
        assert np.all(out <= r + 1e-12) and np.all(out >= 0)
        if not punctures:
            np.testing.assert_array_equal(out, r)
