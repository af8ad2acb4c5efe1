"""Offline handwritten postal-address recognition toolkit."""

__version__ = "0.1.0"
