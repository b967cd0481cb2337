"""Downlink packet scheduling: reward-rate maximizing RB allocation with
deadlines, priorities and a preemptive URLLC overlay, plus the simulation
harness used to compare policies."""

__version__ = "0.1.0"
