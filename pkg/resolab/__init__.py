"""Numerical lab for weighted semiclassical resolvent estimates with singular radial potentials."""

__version__ = "0.3.0"
