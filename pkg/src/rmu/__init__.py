"""Reward machines with noisy or hidden symbol grounding."""

__version__ = "0.1.0"
