"""Numerical laboratory for degenerate p-Laplace equations and their sharp regularity."""

__version__ = "0.1.0"
