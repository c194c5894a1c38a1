"""Simulation and analysis toolkit for a doubly resonant waveguide OPO pair source."""

__version__ = "1.0.0"
