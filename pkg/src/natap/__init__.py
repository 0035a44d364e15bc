"""Noise-aware qubit routing toolkit."""

__version__ = "0.1.0"
