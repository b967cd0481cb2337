"""Run accounting: the on-time reward utility, decision-size histograms, and
cross-replication aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class NoTrafficError(ValueError):
    """Utility is undefined when no rewarded traffic ever arrived."""


@dataclass
class SimReport:
    """Per-run accounting emitted by the simulator."""

    policy: str = ""
    lam: float = 0.0
    seed: int = 0
    arrived: int = 0                    # non-URLLC packets
    delivered: int = 0
    dropped: int = 0
    arrived_reward: float = 0.0
    delivered_reward: float = 0.0
    utility: float | None = None        # None when no rewarded traffic arrived
    arrived_bytes: int = 0
    delivered_bytes: int = 0
    delivered_bytes_fraction: float = 0.0
    urllc_arrived: int = 0
    urllc_sent: int = 0
    urllc_missed: int = 0
    urllc_overloads: int = 0
    decision_histogram: dict[int, int] = field(default_factory=dict)
    subframes: int = 0
    wall_ms: float = 0.0
    claim2_violations: int = 0
    rb_conflicts: int = 0
    conservation_errors: int = 0
    work_conservation_errors: int = 0
    late_deliveries: int = 0

    @property
    def invariant_violations(self) -> int:
        return (self.claim2_violations + self.rb_conflicts
                + self.conservation_errors + self.work_conservation_errors
                + self.late_deliveries)


def utility(delivered_rewards, all_arrived_rewards) -> float:
    """Fraction of arrived (non-URLLC) reward that was delivered on time."""
    denom = float(sum(all_arrived_rewards))
    if denom <= 0:
        raise NoTrafficError("no rewarded traffic arrived")
    value = float(sum(delivered_rewards)) / denom
    if not 0.0 <= value <= 1.0 + 1e-12:
        raise AssertionError(f"utility {value} outside [0, 1]")
    return min(value, 1.0)


def added_packets_histogram(decisions) -> dict[int, int]:
    """Counts of scheduler decisions by how many packets they admitted."""
    hist: dict[int, int] = {}
    for d in decisions:
        n = d.added_count if hasattr(d, "added_count") else int(d)
        hist[n] = hist.get(n, 0) + 1
    return hist


@dataclass
class Summary:
    policy: str
    lam: float
    runs: int
    utility_mean: float
    utility_std: float
    utility_ci95: float
    bytes_fraction_mean: float
    urllc_missed_total: int
    urllc_overloads_total: int


def _mean_std(values):
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(reports) -> list[Summary]:
    """Per-(policy, arrival-rate) sample statistics, ordered and seed-sorted."""
    groups: dict[tuple[str, float], list[SimReport]] = {}
    for r in reports:
        groups.setdefault((r.policy, r.lam), []).append(r)
    out = []
    for (policy, lam) in sorted(groups):
        rs = sorted(groups[(policy, lam)], key=lambda r: r.seed)
        utilities = [r.utility for r in rs if r.utility is not None]
        if not utilities:
            utilities = [0.0]
        mean, std = _mean_std(utilities)
        ci95 = 1.96 * std / math.sqrt(len(utilities)) if len(utilities) > 1 else 0.0
        bf_mean, _ = _mean_std([r.delivered_bytes_fraction for r in rs])
        out.append(Summary(policy, lam, len(rs), mean, std, ci95, bf_mean,
                           sum(r.urllc_missed for r in rs),
                           sum(r.urllc_overloads for r in rs)))
    return out
