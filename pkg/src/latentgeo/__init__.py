"""Quantitative evaluation of latent-space interpolation for VAEs and graph VAEs."""

__version__ = "0.1.0"
