"""Clifford-Witt algebra, parabolic Dirac operators and their integral potentials."""

__version__ = "0.1.0"
