"""Belief-based intrinsic rewards for multi-turn user modeling."""

__version__ = "0.1.0"
