"""Numerical laboratory for resonant decay of waves with oscillating scale-invariant damping."""

__version__ = "0.1.0"
