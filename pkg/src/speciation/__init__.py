"""Moran approximation of a Fleming-Viot model with frequency-dependent selection."""

__version__ = "0.1.0"
