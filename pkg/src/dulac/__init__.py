"""Symbolic and numeric analysis of polycycle monodromy maps in the
logarithmic chart."""

__version__ = "0.1.0"
