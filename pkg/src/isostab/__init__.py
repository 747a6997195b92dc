"""Numerical checks for extremal and stability inequalities of the l-norm and mean width."""

__version__ = "0.1.0"
