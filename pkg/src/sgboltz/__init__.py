"""Stochastic-Galerkin Fourier spectral solver for the space-homogeneous
Boltzmann equation with an uncertain collision kernel."""

__version__ = "0.1.0"
