"""Landmark-driven SE2(3) observer and tracking controller for a VTOL UAV."""

__version__ = "0.1.0"
