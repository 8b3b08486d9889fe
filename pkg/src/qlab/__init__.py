"""Discrete Q-valued harmonic maps, frequency diagnostics, sheet monodromy and cornered open books."""

__version__ = "0.1.0"
