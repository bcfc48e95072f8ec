"""Drone traffic on a spherical airspace: simulation, Edie measurement and Drake FD calibration."""

__version__ = "0.1.0"
