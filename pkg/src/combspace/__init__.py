"""Hyperbolic comb space: construction, path metric and coarse-geometry certificates."""

__version__ = "0.1.0"
