"""Momentum-space multiscale toolkit for quasi-periodic polyharmonic operators."""

__version__ = "0.1.0"
