"""Numerical toolkit for the fractional Laplacian, singular solutions and maximum principles."""

__version__ = "0.1.0"
