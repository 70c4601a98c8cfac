"""Effective-medium reconstruction from droplet-perturbed Neumann-to-Dirichlet data."""

__version__ = "0.1.0"
