"""Causal-cone analysis and exact simulation of sequentially generated states."""

__version__ = "0.1.0"
