"""Witness-based verification of urgent event reports, plus its simulator."""

__version__ = "0.1.0"
