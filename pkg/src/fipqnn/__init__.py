"""Quantized network training as constrained binary optimization."""

__version__ = "0.1.0"
