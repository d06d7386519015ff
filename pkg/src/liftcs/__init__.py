"""Compressive-sensing image reconstruction with matched lifting wavelets."""

__version__ = "0.1.0"
