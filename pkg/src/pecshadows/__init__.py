"""Simulation and verification toolkit for principal-eigenstate classical shadows."""

__version__ = "0.1.0"
