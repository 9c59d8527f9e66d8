"""Spline Galerkin solvers for the (reduced) Camassa-Holm equation."""

__version__ = "0.1.0"
