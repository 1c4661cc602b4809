"""Spectral laboratory for conditional score-based diffusion models."""

__version__ = "0.1.0"
