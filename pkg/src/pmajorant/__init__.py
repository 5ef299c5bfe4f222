"""Guaranteed error majorants for 1D p-Laplacian type problems."""

__version__ = "0.1.0"
