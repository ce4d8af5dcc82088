"""Differentiable inventory-control laboratory."""

__version__ = "0.1.0"
