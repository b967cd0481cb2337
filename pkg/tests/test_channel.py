import numpy as np
import pytest

from mrrsched.channel import (
    MIN_DISTANCE_M,
    ChannelConfig,
    draw_rates,
    place_subscribers,
)


class TestPlacement:
    def test_range_contract(self):
        cfg = ChannelConfig(n_subscribers=500, seed=3)
        d = place_subscribers(cfg)
        assert np.all(d > MIN_DISTANCE_M) and np.all(d <= cfg.cell_radius_m)

    def test_same_seed_same_placement(self):
        cfg = ChannelConfig(seed=11)
        np.testing.assert_array_equal(place_subscribers(cfg), place_subscribers(cfg))
        other = place_subscribers(ChannelConfig(seed=12))
        assert not np.array_equal(place_subscribers(cfg), other)

    def test_mean_distance_monte_carlo(self):
        cfg = ChannelConfig(n_subscribers=10_000, seed=5)
        assert abs(place_subscribers(cfg).mean() - 130.0) < 5.0


class TestDrawRates:
    def test_rates_positive(self):
        cfg = ChannelConfig(n_subscribers=4, n_rbs=6, seed=1)
        m = draw_rates(cfg, place_subscribers(cfg), 0)
        assert m.rates.shape == (4, 6)
        assert np.all(m.rates > 0)

    def test_rate_decreases_with_distance(self):
        cfg = ChannelConfig(n_subscribers=10_000, n_rbs=2, seed=9)
        distances = np.array([50.0] * 5000 + [200.0] * 5000)
        m = draw_rates(cfg, distances, 0)
        assert m.rates[:5000].mean() > m.rates[5000:].mean()

    def test_deterministic_per_seed_and_frame(self):
        cfg = ChannelConfig(n_subscribers=3, n_rbs=4, seed=21)
        d = place_subscribers(cfg)
        a = draw_rates(cfg, d, 7)
        b = draw_rates(cfg, d, 7)
        np.testing.assert_array_equal(a.rates, b.rates)
        c = draw_rates(cfg, d, 8)
        assert not np.array_equal(a.rates, c.rates)

    def test_rejects_negative_frame(self):
        cfg = ChannelConfig()
        with pytest.raises(ValueError):
            draw_rates(cfg, np.array([100.0]), -1)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            ChannelConfig(n_rbs=0)
