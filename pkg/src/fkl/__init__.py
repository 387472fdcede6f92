"""Pseudospectral lab for ground states of the fractional Kirchhoff equation."""

__version__ = "0.1.0"
