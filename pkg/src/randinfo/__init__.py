"""Geometry of random information: point sets, lattices, discrepancy, ellipsoids and recovery."""

from .errors import RandinfoError
from .rng import RngStream

__version__ = "0.1.0"

__all__ = ["RandinfoError", "RngStream", "__version__"]
