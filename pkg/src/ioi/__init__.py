"""Fiducial, bispatial and Bayesian full conditionals combined by Gibbs sampling."""

__version__ = "0.1.0"
