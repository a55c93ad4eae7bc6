"""Common sounding/data beam codebooks for hybrid beamforming with planar arrays."""

__version__ = "0.1.0"
