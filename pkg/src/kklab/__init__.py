"""Numerical laboratory for controlled almost-commuting matrix constructions."""

__version__ = "0.1.0"
