"""Numerical laboratory for decoupling and k-broad norms near the paraboloid."""

__version__ = "0.1.0"
