"""Numerical checks of Hardy inequalities and Schrodinger perturbations of heat kernels."""

__version__ = "0.1.0"
