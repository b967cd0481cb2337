import numpy as np
import pytest

from mrrsched.traffic import TrafficClass, TrafficConfig, default_mixture, generate_stream


def big_stream(n=100_000, lam=5000.0, seed=17):
    cfg = TrafficConfig(arrival_rate=lam, total_packets=n, seed=seed)
    return cfg, generate_stream(cfg, n_subscribers=24)


class TestStream:
    def test_class_shares_match_mixture(self):
        cfg, packets = big_stream()
        shares = [c.share for c in cfg.mixture]
        # identify classes by (urllc, reward-per-byte, length range)
        urllc_frac = sum(p.urllc for p in packets) / len(packets)
        assert abs(urllc_frac - shares[0]) < 0.01
        type1 = sum(1 for p in packets
                    if not p.urllc and p.length_bytes == 64 and p.reward == 256) / len(packets)
        assert abs(type1 - shares[1]) < 0.01
        type5 = sum(1 for p in packets if p.length_bytes == 1500) / len(packets)
        assert abs(type5 - shares[5]) < 0.01

    def test_uniform_length_class_within_range(self):
        _, packets = big_stream(20_000)
        mid = [p for p in packets
               if not p.urllc and p.reward == p.length_bytes and 64 <= p.length_bytes <= 100]
        assert mid, "uniform(64,100) class should be present"
        assert all(64 <= p.length_bytes <= 100 for p in mid)

    def test_mean_interarrival(self):
        lam = 5000.0
        _, packets = big_stream(100_000, lam=lam)
        arrivals_sf = np.array([p.arrival for p in packets], dtype=float)
        mean_gap_s = arrivals_sf[-1] / 1000.0 / len(packets)
        assert abs(mean_gap_s - 1 / lam) < 0.02 / lam

    def test_type1_reward_spot_value(self):
        _, packets = big_stream(20_000)
        type1 = [p for p in packets if not p.urllc and p.length_bytes == 64 and p.reward != 64]
        assert type1 and all(p.reward == 256 for p in type1)

    def test_urllc_flag_and_deadline(self):
        _, packets = big_stream(20_000)
        urllc = [p for p in packets if p.urllc]
        assert urllc
        assert all(p.reward == 0 for p in urllc)
        assert all(p.expiry - p.arrival == 1 for p in urllc)
        assert all(p.length_bytes == 32 for p in urllc)

    def test_exponential_deadlines_floor_at_two_subframes(self):
        _, packets = big_stream(50_000)
        non_urllc = [p for p in packets if not p.urllc]
        assert min(p.expiry - p.arrival for p in non_urllc) >= 2

    def test_sorted_and_reproducible(self):
        cfg1, a = big_stream(5000, seed=3)
        _, b = big_stream(5000, seed=3)
        assert [p.arrival for p in a] == sorted(p.arrival for p in a)
        assert all(x.id == y.id and x.expiry == y.expiry and x.reward == y.reward
                   for x, y in zip(a, b))
        _, c = big_stream(5000, seed=4)
        assert any(x.expiry != y.expiry or x.subscriber != y.subscriber
                   for x, y in zip(a, c))

    def test_subscribers_cover_range(self):
        _, packets = big_stream(5000)
        subs = {p.subscriber for p in packets}
        assert min(subs) >= 0 and max(subs) < 24 and len(subs) == 24


class TestConfig:
    def test_shares_must_sum_to_one(self):
        with pytest.raises(ValueError):
            TrafficConfig(mixture=[TrafficClass(0.5, 10, 10, "const", 0.1, 1)])

    def test_default_mixture_is_valid(self):
        assert sum(c.share for c in default_mixture()) == pytest.approx(1.0)

    def test_exp_deadline_rate_flag(self):
        # with the flag flipped, exp(0.4) is a rate: mean 2.5 s instead of 0.4 s
        cfg_mean = TrafficConfig(total_packets=4000, seed=8)
        cfg_rate = TrafficConfig(total_packets=4000, seed=8, exp_deadline_is_mean=False)
        mean_w = np.mean([p.expiry - p.arrival
                          for p in generate_stream(cfg_mean, 4) if p.length_bytes == 1500])
        rate_w = np.mean([p.expiry - p.arrival
                          for p in generate_stream(cfg_rate, 4) if p.length_bytes == 1500])
        assert rate_w > mean_w

    def test_zero_packets(self):
        cfg = TrafficConfig(total_packets=0)
        assert generate_stream(cfg, 4) == []
