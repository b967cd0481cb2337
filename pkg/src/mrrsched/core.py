"""Domain types and the small rate/reward formulas shared by every module.

Time is measured in integer subframes (1 subframe = 1 ms, 10 subframes per
frame). Packet lengths are carried in bits internally; configs use bytes.
Rates are in bits per subframe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SUBFRAMES_PER_FRAME = 10
SUBFRAME_MS = 1.0


class ExpiredError(ValueError):
    """Raised when a rate is requested for a packet at or past its expiry."""


@dataclass
class Clock:
    """Subframe-resolution simulation clock."""

    now: int = 0
    subframes_per_frame: int = SUBFRAMES_PER_FRAME
    subframe_ms: float = SUBFRAME_MS

    def __post_init__(self):
        if self.now < 0:
            raise ValueError("clock cannot start before subframe 0")
        if self.subframes_per_frame < 1:
            raise ValueError("need at least one subframe per frame")

    @property
    def frame(self) -> int:
        return self.now // self.subframes_per_frame

    def advance(self, subframes: int = 1) -> None:
        self.now += subframes


@dataclass
class Packet:
    """One arriving job: destination, payload, deadline, reward, URLLC flag.

    `rates` is the per-RB transmission-rate snapshot (bits/subframe) taken
    when the packet is handed to a scheduling decision; it stays frozen for
    the whole transmission.
    """

    id: int
    arrival: int                      # subframe index
    expiry: int                       # absolute subframe index, expiry > arrival
    subscriber: int                   # 0-based MS index
    length_bits: int
    reward: float
    urllc: bool = False
    rates: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.expiry <= self.arrival:
            raise ValueError(f"packet {self.id}: expiry must be after arrival")
        if self.length_bits <= 0:
            raise ValueError(f"packet {self.id}: empty payload")
        if self.reward < 0:
            raise ValueError(f"packet {self.id}: negative reward")

    @property
    def length_bytes(self) -> int:
        return self.length_bits // 8


def time_to_expiry(packet: Packet, now: int) -> int:
    """Whole subframes left before the packet expires; <= 0 means expired."""
    return packet.expiry - now


def is_expired(packet: Packet, now: int) -> bool:
    return packet.expiry - now <= 0


@dataclass
class Allocation:
    """Per-packet RB share vector: fractions in [0,1], 0/1 for integral results."""

    x: np.ndarray
    owner: int

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 1:
            raise ValueError("allocation must be a flat per-RB vector")
        if np.any(self.x < -1e-12) or np.any(self.x > 1 + 1e-12):
            raise ValueError(f"allocation for packet {self.owner} outside [0,1]")


@dataclass
class RateMatrix:
    """Per-(subscriber, RB) transmission rates for the current frame."""

    rates: np.ndarray  # shape (M, K), bits/subframe

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.ndim != 2:
            raise ValueError("rate matrix must be 2-D (subscribers x RBs)")
        if np.any(self.rates < 0):
            raise ValueError("rates cannot be negative")

    @property
    def n_subscribers(self) -> int:
        return self.rates.shape[0]

    @property
    def n_rbs(self) -> int:
        return self.rates.shape[1]

    def row(self, subscriber: int) -> np.ndarray:
        return self.rates[subscriber]


def min_rate(length_bits: float, expiry: int, now: int) -> float:
    """Smallest average rate (bits/subframe) that still delivers by expiry."""
    window = expiry - now
    if window <= 0:
        raise ExpiredError(f"expiry {expiry} not after current subframe {now}")
    return length_bits / window


def adjusted_min_rate(length_bits: float, d: int, slack: bool) -> float:
    """Minimum rate for the later packet of a time-shared RB pair.

    Serializing a fractional share costs the later packet up to two extra
    subframes, so its deadline window shrinks by two unless the share left
    after the earlier packet finishes already covers the loss (`slack`).
    Returns ``inf`` when no finite rate can compensate (window too small).
    """
    if d < 1:
        raise ValueError("need at least one subframe to expiry")
    if slack:
        return length_bits / d
    if d > 2:
        return length_bits / (d - 2)
    return math.inf


def reward_rate(reward: float, length_bits: float, x: np.ndarray, rates: np.ndarray) -> float:
    """Reward earned per subframe under allocation x: (w/l) * sum_k x_k r_k."""
    x = np.asarray(x, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if x.shape != rates.shape:
        raise ValueError("allocation and rate vectors differ in length")
    return (reward / length_bits) * float(x @ rates)


def effective_rate_after_puncture(
    rates: np.ndarray,
    punctures: list[tuple[np.ndarray, int]],
    d: int,
) -> np.ndarray:
    """Rate vector left to a victim while URLLC overlays occupy its RBs.

    Each puncture is a (0/1 RB vector, duration) pair; occupying RB k for
    d_l of the victim's d remaining subframes scales that RB's rate by
    (1 - d_l/d), floored at zero. At most one overlay may touch a given RB.
    """
    rates = np.asarray(rates, dtype=float)
    loss = np.zeros_like(rates)
    for x_l, d_l in punctures:
        x_l = np.asarray(x_l, dtype=float)
        if d_l < 1 or d_l > d:
            raise ValueError("puncture duration outside the victim's window")
        loss += (d_l / d) * x_l
    return np.maximum(rates * (1.0 - loss), 0.0)
