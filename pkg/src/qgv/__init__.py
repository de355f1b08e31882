"""Numerical verification of gauge-theory axiom schemes on Euclidean and Minkowski correlators."""

__version__ = "0.1.0"
