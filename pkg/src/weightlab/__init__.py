"""Numerical laboratory for weighted quasi-linear elliptic equations."""

__version__ = "0.1.0"
