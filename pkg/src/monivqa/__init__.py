"""Simulation and analysis toolkit for monitored variational quantum circuits."""

__version__ = "0.1.0"
