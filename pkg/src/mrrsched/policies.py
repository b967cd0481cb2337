"""Scheduling policies: reward-rate maximizers, classical baselines, and the
preemptive URLLC overlay.

Every policy maps (eligible queue heads, free-RB count, clock) to a
ScheduleDecision over the free-RB index space. Rate vectors on the eligible
packets are already restricted to the free RBs. Policies are pure; the
simulator owns all state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Clock, Packet, RateMatrix, adjusted_min_rate
from .solver import (
    ProblemPacket,
    enumerate_subsets_pruned,
    solve_ilp_subset,
    solve_lp2,
)

_EPS = 1e-9

MLWDF_DELTA = 0.05          # target miss probability in the QoS coefficient
MLWDF_SMOOTHING = 0.1       # EWMA weight for the served-rate average


@dataclass
class ScheduleDecision:
    """Chosen packets with their RB shares for one scheduler invocation."""

    chosen: tuple[int, ...] = ()
    allocations: dict[int, np.ndarray] = field(default_factory=dict)
    total_rr: float = 0.0
    added_count: int = 0
    # set for fractional pair decisions: (earlier-deadline id, later id)
    pair_order: tuple[int, int] | None = None

    @property
    def is_empty(self) -> bool:
        return not self.chosen

    @classmethod
    def empty(cls) -> "ScheduleDecision":
        return cls()


def validate_decision(decision: ScheduleDecision, n_rbs: int) -> None:
    """Per-RB shares must sum to at most one (the exclusivity constraint)."""
    if decision.is_empty:
        return
    load = np.zeros(n_rbs)
    for pid in decision.chosen:
        x = decision.allocations[pid]
        if x.shape != (n_rbs,):
            raise AssertionError("allocation length does not match RB count")
        if np.any(x < -_EPS) or np.any(x > 1 + _EPS):
            raise AssertionError("allocation outside [0,1]")
        load += x
    if np.any(load > 1 + 1e-6):
        raise AssertionError("an RB was promised to more than one packet")


def _floor(pkt: Packet, now: int) -> float:
    return pkt.length_bits / (pkt.expiry - now)


def _as_problem_packet(pkt: Packet, floor: float) -> ProblemPacket:
    return ProblemPacket(pkt.id, pkt.reward, pkt.length_bits, pkt.rates, floor)


def mrr_lp2_select(eligible: list[Packet], n_rbs: int, clock: Clock, **_) -> ScheduleDecision:
    """Best singleton or fractional pair by total reward rate.

    Singletons take every free RB; pairs split all free RBs by time sharing,
    with the later-deadline packet's rate floor tightened by two subframes to
    absorb the serialization of fractional shares. Ties go to the
    lexicographically smallest id set.
    """
    now = clock.now
    cands = []
    for pkt in sorted(eligible, key=lambda p: p.id):
        d = pkt.expiry - now
        if d <= 0:
            continue
        coefs = (pkt.reward / pkt.length_bits) * pkt.rates
        cands.append((pkt, d, _floor(pkt, now), coefs, float(pkt.rates.sum())))

    best: ScheduleDecision | None = None
    best_key: tuple[int, ...] = ()

    def consider(rr: float, key: tuple[int, ...], build) -> None:
        nonlocal best, best_key
        if best is None or rr > best.total_rr or (rr == best.total_rr and key < best_key):
            best, best_key = build(), key

    for i, (p1, d1, f1, c1, tot1) in enumerate(cands):
        if tot1 < f1 - _EPS:
            continue  # infeasible even with every RB: prune it and its pairs
        rr1 = float(c1.sum())
        consider(rr1, (p1.id,), lambda p1=p1, rr1=rr1: ScheduleDecision(
            (p1.id,), {p1.id: np.ones(n_rbs)}, rr1, 1))
        for p2, d2, f2, c2, tot2 in cands[i + 1:]:
            if tot2 < f2 - _EPS:
                continue
            early, late = ((p1, d1), (p2, d2))
            if (p2.expiry, p2.id) < (p1.expiry, p1.id):
                early, late = late, early
            late_floor = adjusted_min_rate(late[0].length_bits, late[1], slack=False)
            if math.isinf(late_floor):
                continue
            ub = float(np.maximum(c1, c2).sum())
            if best is not None and ub < best.total_rr * (1 - 1e-12) - _EPS:
                continue
            res = solve_lp2(
                _as_problem_packet(early[0], _floor(early[0], now)),
                _as_problem_packet(late[0], late_floor),
                n_rbs,
            )
            if not res.feasible:
                continue
            key = tuple(sorted((p1.id, p2.id)))
            consider(res.total_rr, key, lambda res=res, key=key, e=early[0], l=late[0]:
                     ScheduleDecision(key, dict(res.allocations), res.total_rr, 2,
                                      pair_order=(e.id, l.id)))
    if best is None:
        return ScheduleDecision.empty()
    validate_decision(best, n_rbs)
    return best


def mrr_ilp_select(eligible: list[Packet], n_rbs: int, clock: Clock, *,
                   p: int, **_) -> ScheduleDecision:
    """Exact subset selection over subsets of size <= p (whole RBs only)."""
    if p < 1:
        raise ValueError("subset bound must be >= 1")
    now = clock.now
    live = [pkt for pkt in eligible if pkt.expiry - now > 0]
    if not live:
        return ScheduleDecision.empty()
    pool = [_as_problem_packet(pkt, _floor(pkt, now)) for pkt in live]
    res = enumerate_subsets_pruned(pool, p, solve_ilp_subset, n_rbs)
    if not res.feasible:
        return ScheduleDecision.empty()
    decision = ScheduleDecision(res.chosen, dict(res.allocations), res.total_rr,
                                len(res.chosen))
    validate_decision(decision, n_rbs)
    return decision


def mud_select(eligible: list[Packet], n_rbs: int, clock: Clock, **_) -> ScheduleDecision:
    """Single packet with the highest feasible reward rate (subset bound 1)."""
    return mrr_ilp_select(eligible, n_rbs, clock, p=1)


def edf_select(eligible: list[Packet], n_rbs: int, clock: Clock, **_) -> ScheduleDecision:
    """Earliest deadline takes every free RB; no feasibility screening."""
    live = [pkt for pkt in eligible if pkt.expiry - clock.now > 0]
    if not live:
        return ScheduleDecision.empty()
    winner = min(live, key=lambda p: (p.expiry, p.id))
    rr = (winner.reward / winner.length_bits) * float(winner.rates.sum())
    decision = ScheduleDecision((winner.id,), {winner.id: np.ones(n_rbs)}, rr, 1)
    validate_decision(decision, n_rbs)
    return decision


def _per_rb_argmax(live: list[Packet], metric: np.ndarray, n_rbs: int) -> ScheduleDecision:
    """Give each RB to the row with the largest metric (ties: lowest id)."""
    winners = np.argmax(metric, axis=0)  # live is id-sorted, argmax takes first max
    allocations: dict[int, np.ndarray] = {}
    total = 0.0
    for k in range(n_rbs):
        pkt = live[int(winners[k])]
        allocations.setdefault(pkt.id, np.zeros(n_rbs))[k] = 1.0
        total += (pkt.reward / pkt.length_bits) * float(pkt.rates[k])
    chosen = tuple(sorted(allocations))
    decision = ScheduleDecision(chosen, allocations, total, len(chosen))
    validate_decision(decision, n_rbs)
    return decision


def mxrate_select(eligible: list[Packet], n_rbs: int, clock: Clock, **_) -> ScheduleDecision:
    """Per-RB maximum transmission rate, deadline- and reward-blind."""
    live = sorted((p for p in eligible if p.expiry - clock.now > 0), key=lambda p: p.id)
    if not live:
        return ScheduleDecision.empty()
    rates = np.array([p.rates for p in live])
    return _per_rb_argmax(live, rates, n_rbs)


def mlwdf_select(eligible: list[Packet], n_rbs: int, clock: Clock, *,
                 mean_rates: dict[int, float] | None = None, **_) -> ScheduleDecision:
    """Largest weighted delay first with channel awareness.

    Per-RB metric: gamma * waiting * r(k) / r_mean, with gamma =
    -ln(delta)/lifetime. Waiting counts the in-progress subframe so that
    packets arriving this tick still compete on rate.
    """
    now = clock.now
    live = sorted((p for p in eligible if p.expiry - now > 0), key=lambda p: p.id)
    if not live:
        return ScheduleDecision.empty()
    mean_rates = mean_rates or {}
    metric = np.zeros((len(live), n_rbs))
    for i, pkt in enumerate(live):
        lifetime = pkt.expiry - pkt.arrival
        gamma = -math.log(MLWDF_DELTA) / lifetime
        waiting = now - pkt.arrival + 1
        r_mean = mean_rates.get(pkt.subscriber) or max(float(pkt.rates.mean()), _EPS)
        metric[i] = gamma * waiting * pkt.rates / r_mean
    return _per_rb_argmax(live, metric, n_rbs)


# ---------------------------------------------------------------------------
# URLLC overlay
# ---------------------------------------------------------------------------


@dataclass
class InflightView:
    """What the URLLC overlay needs to know about one in-flight transmission.

    `avail` gives, per RB, how many subframes the packet is still entitled to
    on that RB (defaults to its whole remaining window). Time-shared holds
    pass the shortened windows here.
    """

    id: int
    reward: float
    length_bits: float
    held: np.ndarray            # 0/1 per RB
    rates: np.ndarray           # frozen rate snapshot, bits/subframe
    remaining_bits: float
    expiry: int
    avail: np.ndarray | None = None

    def windows(self, now: int) -> np.ndarray:
        d = max(self.expiry - now, 0)
        if self.avail is None:
            return np.full(len(self.held), float(d))
        return np.minimum(np.asarray(self.avail, dtype=float), d)


@dataclass
class UrllcAssignment:
    packet_id: int
    x: np.ndarray               # 0/1 per RB
    duration: int               # subframes the overlay occupies its RBs
    rate: float


@dataclass
class UrllcOverlay:
    assignments: list[UrllcAssignment] = field(default_factory=list)
    victims: tuple[int, ...] = ()       # in-flight packets sharing a punctured RB
    dropped: tuple[int, ...] = ()       # victims that can no longer finish in time
    overloaded: tuple[int, ...] = ()    # URLLC packets that could not reach their floor
    inflight_count: int = 0
    urllc_count: int = 0


def _deliverable_bits(view: InflightView, now: int,
                      punctures: list[UrllcAssignment]) -> float:
    """Bits the victim can still receive inside its per-RB hold windows."""
    windows = view.windows(now)
    lost = np.zeros_like(windows)
    for asg in punctures:
        lost += np.minimum(float(asg.duration), windows) * asg.x
    usable = np.maximum(windows - lost, 0.0)
    return float((view.held * view.rates * usable).sum())


def _recheck_victims(inflight, assignments, now):
    victims, dropped = [], []
    for view in inflight:
        hits = [asg for asg in assignments if float((asg.x * view.held).sum()) > 0]
        if not hits:
            continue
        victims.append(view.id)
        if _deliverable_bits(view, now, hits) + _EPS < view.remaining_bits:
            dropped.append(view.id)
    return tuple(victims), tuple(dropped)


def urllc_preempt(urllc_queue: list[Packet], inflight: list[InflightView],
                  rates: RateMatrix, clock: Clock,
                  busy_rbs: frozenset[int] = frozenset()) -> UrllcOverlay:
    """Greedy descending-rate RB assignment for URLLC packets, FIFO order.

    Each packet grabs its fastest still-unclaimed RBs until its rate floor is
    met, occupying them for its whole transmission; one overlay per RB.
    In-flight victims that can no longer meet their own floor under the
    overlay are reported as dropped. A packet that cannot reach its floor is
    reported overloaded and receives nothing.
    """
    now = clock.now
    n_rbs = rates.n_rbs
    taken = set(busy_rbs)
    assignments: list[UrllcAssignment] = []
    overloaded = []
    for pkt in urllc_queue:
        d = pkt.expiry - now
        if d <= 0:
            continue
        floor = pkt.length_bits / d
        row = rates.row(pkt.subscriber)
        order = np.lexsort((np.arange(n_rbs), -row))
        x = np.zeros(n_rbs)
        acc = 0.0
        for k in order:
            if int(k) in taken:
                continue
            x[k] = 1.0
            acc += float(row[k])
            if acc >= floor - _EPS:
                break
        if acc < floor - _EPS:
            overloaded.append(pkt.id)
            continue
        duration = max(1, math.ceil(pkt.length_bits / acc - _EPS))
        taken.update(int(k) for k in np.flatnonzero(x))
        assignments.append(UrllcAssignment(pkt.id, x, duration, acc))
    victims, dropped = _recheck_victims(inflight, assignments, now)
    return UrllcOverlay(assignments, victims, dropped, tuple(overloaded),
                        inflight_count=len(inflight), urllc_count=len(urllc_queue))


def overlay_kept_rr(overlay: UrllcOverlay, inflight: list[InflightView]) -> float:
    """Total nominal reward rate of in-flight packets that survive the overlay."""
    dropped = set(overlay.dropped)
    total = 0.0
    for view in inflight:
        if view.id in dropped:
            continue
        total += (view.reward / view.length_bits) * float((view.held * view.rates).sum())
    return total


def urllc_exhaustive_oracle(urllc_queue: list[Packet], inflight: list[InflightView],
                            rates: RateMatrix, clock: Clock,
                            busy_rbs: frozenset[int] = frozenset()) -> UrllcOverlay | None:
    """Exact best URLLC assignment by enumerating all RB subsets per packet.

    Maximizes the surviving in-flight reward rate subject to every URLLC
    packet reaching its floor on mutually disjoint RBs. Returns None when no
    joint assignment serves all URLLC packets. Desk scale only.
    """
    now = clock.now
    n_rbs = rates.n_rbs
    live = [p for p in urllc_queue if p.expiry - now > 0]
    if n_rbs * len(live) > 14:
        raise ValueError("oracle limited to K * n_urllc <= 14")
    if not live:
        return UrllcOverlay(inflight_count=len(inflight))
    free = [k for k in range(n_rbs) if k not in busy_rbs]
    masks = range(1 << len(free))

    def mask_to_x(mask: int) -> np.ndarray:
        x = np.zeros(n_rbs)
        for i, k in enumerate(free):
            if mask >> i & 1:
                x[k] = 1.0
        return x

    best_score, best_assignments = -math.inf, None
    for combo in _disjoint_mask_combos(masks, len(live)):
        assignments = []
        ok = True
        for pkt, mask in zip(live, combo):
            x = mask_to_x(mask)
            acc = float((x * rates.row(pkt.subscriber)).sum())
            floor = pkt.length_bits / (pkt.expiry - now)
            if acc < floor - _EPS:
                ok = False
                break
            assignments.append(UrllcAssignment(
                pkt.id, x, max(1, math.ceil(pkt.length_bits / acc - _EPS)), acc))
        if not ok:
            continue
        victims, dropped = _recheck_victims(inflight, assignments, now)
        overlay = UrllcOverlay(assignments, victims, dropped, (),
                               inflight_count=len(inflight), urllc_count=len(live))
        score = overlay_kept_rr(overlay, inflight)
        if score > best_score:
            best_score, best_assignments = score, overlay
    return best_assignments


def _disjoint_mask_combos(masks, n):
    """All n-tuples of pairwise-disjoint bitmasks."""
    if n == 1:
        for m in masks:
            yield (m,)
        return
    for head in masks:
        for tail in _disjoint_mask_combos(masks, n - 1):
            if all(head & t == 0 for t in tail):
                yield (head,) + tail


# ---------------------------------------------------------------------------
# Policy registry
# ---------------------------------------------------------------------------

POLICY_NAMES = ("mrr-lp2", "mrr-ilp:<p>", "edf", "mxrate", "mud", "mlwdf")


def make_policy(name: str):
    """Resolve a policy name ("mrr-lp2", "mrr-ilp:4", "edf", ...) to a callable."""
    if name == "mrr-lp2":
        return mrr_lp2_select
    if name.startswith("mrr-ilp:"):
        p = int(name.split(":", 1)[1])

        def ilp(eligible, n_rbs, clock, **ctx):
            return mrr_ilp_select(eligible, n_rbs, clock, p=p, **ctx)

        ilp.__name__ = f"mrr_ilp{p}_select"
        return ilp
    table = {"edf": edf_select, "mxrate": mxrate_select, "mud": mud_select,
             "mlwdf": mlwdf_select}
    if name in table:
        return table[name]
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
