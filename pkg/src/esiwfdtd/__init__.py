"""FDTD modelling of an ESIW-fed aperture-coupled patch antenna."""

__version__ = "0.1.0"
