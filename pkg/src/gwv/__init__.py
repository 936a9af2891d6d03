"""Discrete measures, curve systems, Young measures and varifolds for the
generalized Willmore functional."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
