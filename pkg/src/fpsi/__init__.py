"""Finite-element simulation of Stokes flow coupled to thin poroelastic walls."""

__version__ = "0.1.0"
