"""Bit-serial functional simulator for a racetrack-memory CNN accelerator."""
__version__ = "0.1.0"
