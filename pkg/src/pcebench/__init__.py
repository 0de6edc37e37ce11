"""Pauli check sandwiching, check extrapolation, ZNE and classical shadows on a noisy simulator."""

__version__ = "0.1.0"
