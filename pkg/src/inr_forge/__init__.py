"""Coordinate networks with Gaussian-windowed Fourier features."""
