"""Spectral-geometry laboratory for the de Rham complex with absolute boundary conditions."""

__version__ = "0.1.0"
