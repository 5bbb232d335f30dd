"""Numerical laboratory for Gaussian geometric measure theory."""

__version__ = "0.1.0"
