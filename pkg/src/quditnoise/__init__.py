"""Qudit noise spectroscopy: switching functions, filter functions, forward
simulation of frequency-comb measurements and linear spectrum inversion."""

__version__ = "0.1.0"
