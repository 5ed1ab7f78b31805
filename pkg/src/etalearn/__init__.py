"""Extreme-event-aware regression with a tail-emphasised 1-Wasserstein penalty."""

__version__ = "0.1.0"
