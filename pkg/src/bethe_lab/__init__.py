"""Numerical laboratory for the Anderson model on regular trees."""

__version__ = "0.1.0"
