"""Capacity bounds and timing-based codes for energy harvesting channels with a unit battery."""

from ehcap.prob import Pmf, entropy, binary_entropy, geometric, truncated_geom_gap

__version__ = "0.1.0"

__all__ = ["Pmf", "entropy", "binary_entropy", "geometric", "truncated_geom_gap"]
