"""Seasonal IR model fitting and Floquet stability analysis."""

__version__ = "0.1.0"
