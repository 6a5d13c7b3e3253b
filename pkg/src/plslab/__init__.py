"""Numerical checks of annulus uncertainty principles and damped fractional waves."""

__version__ = "0.1.0"
