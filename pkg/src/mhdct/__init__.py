"""Unstaggered constrained transport for ideal MHD with kernel-based potential solvers."""

__version__ = "0.1.0"
