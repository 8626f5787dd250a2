"""Numerical laboratory for extreme value laws and hitting/return time
statistics of non-smooth observables over concrete 1-D dynamical systems."""

__version__ = "0.1.0"
