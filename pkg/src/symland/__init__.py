"""Symmetries, connected components and connecting curves of neural network minima."""

from . import curves, io, linalg, models, symmetry, topology

__version__ = "0.1.0"

__all__ = ["curves", "io", "linalg", "models", "symmetry", "topology", "__version__"]
