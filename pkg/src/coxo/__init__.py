"""coxo: exact-arithmetic moment-graph category O engine for Coxeter systems."""

__version__ = "0.1.0"
