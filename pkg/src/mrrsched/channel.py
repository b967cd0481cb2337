"""Seeded fading-channel model producing per-frame rate matrices.

Log-distance path loss (urban macro style exponent, no line of sight) plus
i.i.d. per-RB Rayleigh block fading, mapped to bits/subframe through Shannon
capacity. Rates are block-constant within a frame and reproducible from
(seed, frame_index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SUBFRAME_MS, RateMatrix

PATH_LOSS_EXPONENT = 3.7
MIN_DISTANCE_M = 10.0       # keeps the path-loss model away from its singularity
THERMAL_NOISE_DBM_HZ = -174.0
_PLACEMENT_STREAM = 0
_FADING_STREAM = 1


@dataclass
class ChannelConfig:
    n_rbs: int = 15
    rb_bandwidth_hz: float = 180e3
    carrier_hz: float = 6e9
    tx_power_dbm: float = 42.0
    tower_height_m: float = 25.0
    cell_radius_m: float = 250.0
    n_subscribers: int = 24
    noise_figure_db: float = 9.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_rbs", "rb_bandwidth_hz", "carrier_hz", "cell_radius_m",
                     "n_subscribers", "tower_height_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def noise_dbm(self) -> float:
        return (THERMAL_NOISE_DBM_HZ + 10 * math.log10(self.rb_bandwidth_hz)
                + self.noise_figure_db)

    @property
    def reference_loss_db(self) -> float:
        """Free-space loss at one metre for the configured carrier."""
        c = 299_792_458.0
        return 20 * math.log10(4 * math.pi * self.carrier_hz / c)


def place_subscribers(cfg: ChannelConfig) -> np.ndarray:
    """Distances (m) drawn uniformly in (MIN_DISTANCE_M, cell_radius_m]."""
    rng = np.random.default_rng([cfg.seed, _PLACEMENT_STREAM])
    span = cfg.cell_radius_m - MIN_DISTANCE_M
    return cfg.cell_radius_m - rng.random(cfg.n_subscribers) * span


def mean_snr_db(cfg: ChannelConfig, distance_m: np.ndarray) -> np.ndarray:
    path_loss = cfg.reference_loss_db + 10 * PATH_LOSS_EXPONENT * np.log10(distance_m)
    return cfg.tx_power_dbm - path_loss - cfg.noise_dbm


def draw_rates(cfg: ChannelConfig, distances_m: np.ndarray, frame_index: int) -> RateMatrix:
    """Rate matrix (bits/subframe) for one frame.

    SNR = mean SNR from path loss, scaled by an exponential (Rayleigh power)
    fade drawn i.i.d. per (subscriber, RB); the fade is frozen for the frame.
    """
    if frame_index < 0:
        raise ValueError("frame index must be nonnegative")
    distances_m = np.asarray(distances_m, dtype=float)
    rng = np.random.default_rng([cfg.seed, _FADING_STREAM, frame_index])
    fade = rng.exponential(1.0, (len(distances_m), cfg.n_rbs))
    snr = 10 ** (mean_snr_db(cfg, distances_m)[:, None] / 10) * fade
    bits_per_subframe = (cfg.rb_bandwidth_hz * np.log2(1 + snr)
                         * SUBFRAME_MS * 1e-3)
    return RateMatrix(np.maximum(bits_per_subframe, 0.0))
