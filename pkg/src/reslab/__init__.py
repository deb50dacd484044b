"""Numerical laboratory for resistance-form convergence rates."""

__version__ = "0.1.0"
