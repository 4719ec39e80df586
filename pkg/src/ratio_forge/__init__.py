"""Density-ratio estimation and b-GAN training on synthetic data."""

__version__ = "0.1.0"
