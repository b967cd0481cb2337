"""Discrete-event downlink engine at subframe resolution.

Each subframe: admit arrivals, purge expired packets, overlay any new URLLC
arrivals (puncturing in-flight transmissions), invoke the configured policy
on the queue heads if free RBs exist, transmit, then deliver completions and
process scheduled pair handovers.

Fractional pair allocations are realized per RB: the earlier-deadline packet
holds a shared RB for ceil(x * d1) subframes at full rate, then hands it
over. That realization keeps the earlier packet on time and bounds the later
packet by two extra subframes; the pair monitor counts any violation.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics, policies
from .channel import ChannelConfig, draw_rates, place_subscribers
from .core import Clock, Packet, RateMatrix
from .policies import InflightView, ScheduleDecision, make_policy
from .traffic import TrafficConfig, generate_stream

_EPS = 1e-9


def pair_handover_bounds(x: float, d1: int, d2: int) -> tuple[int, int]:
    """Subframes the earlier packet keeps a shared RB, and the subframe by
    which the later packet's share on it completes. The second value never
    exceeds d2 + 2."""
    first = math.ceil(x * d1 - _EPS)
    second = first + math.ceil((1 - x) * d2 - _EPS)
    return first, second


@dataclass
class _PairRecord:
    t0: int
    early_id: int
    late_id: int
    early_expiry: int
    late_expiry: int
    punctured: set = field(default_factory=set)


@dataclass
class _InFlight:
    pkt: Packet
    remaining: float
    # rb -> handover subframe for time-shared holds, None for plain holds
    held: dict[int, int | None]


class Simulation:
    """One seeded run of one policy over a fixed packet stream."""

    def __init__(self, stream, n_rbs, n_subscribers, rate_provider, policy,
                 policy_name="", event_log=None):
        self.stream = sorted(stream, key=lambda p: (p.arrival, p.id))
        self.n_rbs = n_rbs
        self.n_subscribers = n_subscribers
        self.rate_provider = rate_provider
        self.policy = make_policy(policy) if isinstance(policy, str) else policy
        self.policy_name = policy_name or (policy if isinstance(policy, str) else
                                           getattr(policy, "__name__", "custom"))
        self.event_log = event_log

        self.clock = Clock()
        self.rates: RateMatrix | None = None
        self._frame_loaded = -1
        self.mean_rates: dict[int, float] = {}

        self.queues = [[] for _ in range(n_subscribers)]  # heaps of (expiry, id, pkt)
        self.queued = 0
        self.urllc_queue: deque[Packet] = deque()
        self.inflight: dict[int, _InFlight] = {}
        self.urllc_flight: list[tuple[Packet, int, tuple[int, ...]]] = []
        self.rb_owner: list[int | None] = [None] * n_rbs
        self.urllc_busy: dict[int, int] = {}          # rb -> occupancy end subframe
        self.successor: dict[int, tuple[int, int]] = {}  # rb -> (late id, start)
        self.pair_of: dict[int, _PairRecord] = {}

        self._ptr = 0
        self._served_bits: dict[int, float] = {}
        self.arrived = 0
        self.arrived_urllc = 0
        self.arrived_rewards: list[float] = []
        self.delivered_rewards: list[float] = []
        self.arrived_bytes = 0
        self.delivered_bytes = 0
        self.delivered = 0
        self.dropped = 0
        self.urllc_sent = 0
        self.urllc_missed = 0
        self.urllc_overloads = 0
        self.decision_added: list[int] = []
        self.claim2_violations = 0
        self.rb_conflicts = 0
        self.conservation_errors = 0
        self.work_conservation_errors = 0
        self.late_deliveries = 0
        self._max_t = max((p.expiry for p in self.stream), default=0) + 2

    # -- helpers ----------------------------------------------------------

    def _log(self, event, pkt_id, rbs=()):
        if self.event_log is not None:
            self.event_log.write(json.dumps(
                {"tick": self.clock.now, "event": event, "pkt": pkt_id,
                 "rbs": sorted(int(k) for k in rbs)}) + "\n")

    def _load_frame(self):
        frame = self.clock.frame
        if frame == self._frame_loaded:
            return
        self._frame_loaded = frame
        self.rates = self.rate_provider(frame)
        if not self.mean_rates:
            # served-throughput EWMA starts from the achievable mean so the
            # first decisions are not dominated by a cold start
            row_means = self.rates.rates.mean(axis=1)
            for m in range(self.n_subscribers):
                self.mean_rates[m] = max(float(row_means[m]), 1.0)

    def _admit_arrivals(self, t):
        while self._ptr < len(self.stream) and self.stream[self._ptr].arrival <= t:
            pkt = self.stream[self._ptr]
            self._ptr += 1
            self.arrived += 1
            if pkt.urllc:
                self.arrived_urllc += 1
                self.urllc_queue.append(pkt)
            else:
                self.arrived_rewards.append(pkt.reward)
                self.arrived_bytes += pkt.length_bytes
                heapq.heappush(self.queues[pkt.subscriber], (pkt.expiry, pkt.id, pkt))
                self.queued += 1
            self._log("arrive", pkt.id)

    def _purge_expired(self, t):
        for q in self.queues:
            while q and q[0][0] <= t:
                _, _, pkt = heapq.heappop(q)
                self.queued -= 1
                self.dropped += 1
                self._log("drop", pkt.id)
        while self.urllc_queue and self.urllc_queue[0].expiry <= t:
            pkt = self.urllc_queue.popleft()
            self.urllc_missed += 1
            self._log("urllc-miss", pkt.id)
        for pid in [pid for pid, fl in self.inflight.items() if fl.pkt.expiry <= t]:
            self._drop_inflight(pid, "expired")

    def _drop_inflight(self, pid, cause):
        fl = self.inflight[pid]
        record = self.pair_of.get(pid)
        if record is not None and pid not in record.punctured:
            # a pair member may only fail because an overlay punctured it
            self.claim2_violations += 1
        self._release(pid)
        self.dropped += 1
        self._log(f"drop-{cause}", pid, fl.held.keys())

    def _release(self, pid):
        """Free or hand over every RB touched by a finished/failed packet."""
        fl = self.inflight.pop(pid)
        for rb in list(fl.held):
            nxt = self.successor.get(rb)
            if nxt is not None and nxt[0] != pid:
                late_id = nxt[0]
                del self.successor[rb]
                late = self.inflight.get(late_id)
                if late is not None:
                    late.held[rb] = None
                    self.rb_owner[rb] = late_id
                    continue
            self.rb_owner[rb] = None
        for rb in [rb for rb, (lid, _) in self.successor.items() if lid == pid]:
            del self.successor[rb]
            early = self.inflight.get(self.rb_owner[rb]) if self.rb_owner[rb] is not None else None
            if early is not None:
                early.held[rb] = None  # nobody waits anymore: plain hold

    def _inflight_views(self, t):
        views = []
        for fl in self.inflight.values():
            held = np.zeros(self.n_rbs)
            avail = np.zeros(self.n_rbs)
            window = fl.pkt.expiry - t
            for rb, handover in fl.held.items():
                held[rb] = 1.0
                avail[rb] = window if handover is None else max(handover - t, 0)
            for rb, (lid, start) in self.successor.items():
                if lid == fl.pkt.id:
                    held[rb] = 1.0
                    avail[rb] = max(fl.pkt.expiry - start, 0)
            views.append(InflightView(fl.pkt.id, fl.pkt.reward, fl.pkt.length_bits,
                                      held, fl.pkt.rates, fl.remaining,
                                      fl.pkt.expiry, avail))
        return views

    def _preempt_urllc(self, t):
        views = self._inflight_views(t)
        busy = frozenset(rb for rb, end in self.urllc_busy.items() if end > t)
        overlay = policies.urllc_preempt(list(self.urllc_queue), views,
                                         self.rates, self.clock, busy)
        assigned = {a.packet_id for a in overlay.assignments}
        for asg in overlay.assignments:
            rbs = tuple(int(k) for k in np.flatnonzero(asg.x))
            pkt = next(p for p in self.urllc_queue if p.id == asg.packet_id)
            end = t + asg.duration
            self.urllc_flight.append((pkt, end, rbs))
            for rb in rbs:
                self.urllc_busy[rb] = end
            self._log("puncture", asg.packet_id, rbs)
        if assigned:
            self.urllc_queue = deque(p for p in self.urllc_queue if p.id not in assigned)
        self.urllc_overloads += len(overlay.overloaded)
        for pid in overlay.overloaded:
            self._log("overload", pid)
        for vid in overlay.victims:
            record = self.pair_of.get(vid)
            if record is not None:
                record.punctured.add(vid)
        for vid in overlay.dropped:
            if vid in self.inflight:
                self._drop_inflight(vid, "punctured")

    def _eligible_heads(self, free_idx):
        heads = []
        for q in self.queues:
            if q:
                pkt = q[0][2]
                pkt.rates = self.rates.rates[pkt.subscriber, free_idx].copy()
                heads.append(pkt)
        return heads

    def _schedule(self, t):
        free_idx = np.array([k for k in range(self.n_rbs)
                             if self.rb_owner[k] is None
                             and self.urllc_busy.get(k, 0) <= t], dtype=int)
        if free_idx.size == 0:
            return
        heads = self._eligible_heads(free_idx)
        if not heads:
            return
        decision = self.policy(heads, len(free_idx), self.clock,
                               mean_rates=self.mean_rates)
        if decision.is_empty:
            # work conservation: an empty decision is only acceptable when no
            # head could meet its rate floor even with every free RB
            for pkt in heads:
                floor = pkt.length_bits / (pkt.expiry - t)
                if float(pkt.rates.sum()) >= floor - _EPS:
                    self.work_conservation_errors += 1
                    break
            return
        self.decision_added.append(decision.added_count)
        if decision.pair_order is not None:
            self._admit_pair(decision, free_idx, t)
        else:
            for pid in decision.chosen:
                x = decision.allocations[pid]
                rbs = [int(free_idx[i]) for i in np.flatnonzero(x > 0.5)]
                self._admit(pid, {rb: None for rb in rbs})

    def _pop_queued(self, pid):
        for q in self.queues:
            if q and q[0][1] == pid:
                _, _, pkt = heapq.heappop(q)
                self.queued -= 1
                return pkt
        raise AssertionError(f"packet {pid} is not a queue head")

    def _admit(self, pid, held):
        pkt = self._pop_queued(pid)
        pkt.rates = self.rates.rates[pkt.subscriber].copy()
        for rb in held:
            if self.rb_owner[rb] is not None:
                self.rb_conflicts += 1
            self.rb_owner[rb] = pid
        self.inflight[pid] = _InFlight(pkt, float(pkt.length_bits), dict(held))
        self._log("admit", pid, held.keys())
        return pkt

    def _admit_pair(self, decision, free_idx, t):
        early_id, late_id = decision.pair_order
        x_early = decision.allocations[early_id]
        early_held: dict[int, int | None] = {}
        late_held: dict[int, int | None] = {}
        handovers = []
        early_pkt = late_pkt = None
        for q in self.queues:
            if q and q[0][1] == early_id:
                early_pkt = q[0][2]
            if q and q[0][1] == late_id:
                late_pkt = q[0][2]
        d1 = early_pkt.expiry - t
        d2 = late_pkt.expiry - t
        for i, rb in enumerate(int(k) for k in free_idx):
            xv = float(x_early[i])
            if xv >= 1 - _EPS:
                early_held[rb] = None
            elif xv <= _EPS:
                late_held[rb] = None
            else:
                first, second = pair_handover_bounds(xv, d1, d2)
                if first > d1 or second > d2 + 2:
                    self.claim2_violations += 1
                if first <= 0:
                    late_held[rb] = None
                else:
                    early_held[rb] = t + first
                    handovers.append((rb, t + first))
        self._admit(early_id, early_held)
        self._admit(late_id, late_held)
        if handovers:
            record = _PairRecord(t, early_id, late_id,
                                 early_pkt.expiry, late_pkt.expiry)
            self.pair_of[early_id] = record
            self.pair_of[late_id] = record
            for rb, start in handovers:
                self.successor[rb] = (late_id, start)
                self._log("handover-scheduled", late_id, (rb,))

    def _transmit(self, t):
        served = self._served_bits
        served.clear()
        for fl in self.inflight.values():
            rate = 0.0
            for rb in fl.held:
                if self.urllc_busy.get(rb, 0) > t:
                    continue  # punctured this subframe
                rate += float(fl.pkt.rates[rb])
            fl.remaining -= rate
            m = fl.pkt.subscriber
            served[m] = served.get(m, 0.0) + rate
        # per-subscriber served-throughput EWMA (the channel-aware baselines
        # normalize by it; idle subframes decay it, as in proportional fair)
        beta = policies.MLWDF_SMOOTHING
        for m in range(self.n_subscribers):
            self.mean_rates[m] = max(
                (1 - beta) * self.mean_rates[m] + beta * served.get(m, 0.0), 1.0)

    def _complete(self, t):
        done = [pid for pid, fl in self.inflight.items() if fl.remaining <= _EPS]
        for pid in done:
            fl = self.inflight[pid]
            delivered_time = t + 1
            record = self.pair_of.get(pid)
            bound = fl.pkt.expiry + (2 if record and pid == record.late_id else 0)
            if delivered_time > bound:
                self.claim2_violations += 1
            if delivered_time > fl.pkt.expiry:
                self.late_deliveries += 1
                self._release(pid)
                self.dropped += 1
                continue
            self._release(pid)
            self.delivered += 1
            self.delivered_rewards.append(fl.pkt.reward)
            self.delivered_bytes += fl.pkt.length_bytes
            self._log("deliver", pid)
        still = []
        for pkt, end, rbs in self.urllc_flight:
            if end <= t + 1:
                self.urllc_sent += 1
                self._log("urllc-deliver", pkt.id, rbs)
            else:
                still.append((pkt, end, rbs))
        self.urllc_flight = still

    def _apply_handovers(self, t):
        due = [rb for rb, (_, start) in self.successor.items() if start <= t + 1]
        for rb in due:
            late_id, _ = self.successor.pop(rb)
            early_id = self.rb_owner[rb]
            early = self.inflight.get(early_id) if early_id is not None else None
            if early is not None:
                early.held.pop(rb, None)
            late = self.inflight.get(late_id)
            if late is not None:
                late.held[rb] = None
                self.rb_owner[rb] = late_id
            else:
                self.rb_owner[rb] = None

    def _check_conservation(self):
        accounted = (self.delivered + self.dropped + self.urllc_sent
                     + self.urllc_missed + self.queued + len(self.inflight)
                     + len(self.urllc_queue) + len(self.urllc_flight))
        if accounted != self.arrived:
            self.conservation_errors += 1

    def step(self):
        t = self.clock.now
        self._load_frame()
        self._admit_arrivals(t)
        self._purge_expired(t)
        if self.urllc_queue:
            self._preempt_urllc(t)
        self._schedule(t)
        self._transmit(t)
        self._complete(t)
        self._apply_handovers(t)
        for rb in [rb for rb, end in self.urllc_busy.items() if end <= t + 1]:
            del self.urllc_busy[rb]
        self._check_conservation()
        self.clock.advance()

    @property
    def outstanding(self) -> int:
        unseen = len(self.stream) - self._ptr
        return (unseen + self.queued + len(self.inflight)
                + len(self.urllc_queue) + len(self.urllc_flight))

    def run_to_completion(self) -> metrics.SimReport:
        start = time.perf_counter()
        while self.outstanding > 0:
            if self.clock.now > self._max_t:
                raise AssertionError("simulation failed to drain by the last expiry")
            self.step()
        wall_ms = (time.perf_counter() - start) * 1000
        return self._report(wall_ms)

    def _report(self, wall_ms) -> metrics.SimReport:
        try:
            u = metrics.utility(self.delivered_rewards, self.arrived_rewards)
        except metrics.NoTrafficError:
            u = None
        arrived_non_urllc = self.arrived - self.arrived_urllc
        return metrics.SimReport(
            policy=self.policy_name,
            seed=0,
            arrived=arrived_non_urllc,
            delivered=self.delivered,
            dropped=self.dropped,
            arrived_reward=float(sum(self.arrived_rewards)),
            delivered_reward=float(sum(self.delivered_rewards)),
            utility=u,
            arrived_bytes=self.arrived_bytes,
            delivered_bytes=self.delivered_bytes,
            delivered_bytes_fraction=(self.delivered_bytes / self.arrived_bytes
                                      if self.arrived_bytes else 0.0),
            urllc_arrived=self.arrived_urllc,
            urllc_sent=self.urllc_sent,
            urllc_missed=self.urllc_missed,
            urllc_overloads=self.urllc_overloads,
            decision_histogram=metrics.added_packets_histogram(self.decision_added),
            subframes=self.clock.now,
            wall_ms=wall_ms,
            claim2_violations=self.claim2_violations,
            rb_conflicts=self.rb_conflicts,
            conservation_errors=self.conservation_errors,
            work_conservation_errors=self.work_conservation_errors,
            late_deliveries=self.late_deliveries,
        )


def run(policy, traffic_cfg: TrafficConfig, channel_cfg: ChannelConfig,
        seed: int, lam: float | None = None, event_log=None) -> metrics.SimReport:
    """One full seeded replication of one policy."""
    tcfg = replace(traffic_cfg, seed=seed,
                   arrival_rate=lam if lam is not None else traffic_cfg.arrival_rate)
    ccfg = replace(channel_cfg, seed=seed)
    stream = generate_stream(tcfg, ccfg.n_subscribers)
    distances = place_subscribers(ccfg)

    def provider(frame):
        return draw_rates(ccfg, distances, frame)

    name = policy if isinstance(policy, str) else getattr(policy, "__name__", "custom")
    sim = Simulation(stream, ccfg.n_rbs, ccfg.n_subscribers, provider, policy,
                     policy_name=name, event_log=event_log)
    report = sim.run_to_completion()
    report.seed = seed
    report.lam = tcfg.arrival_rate
    return report
