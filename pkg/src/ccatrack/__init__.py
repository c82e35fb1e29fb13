"""Codebook-based mmWave beam tracking with DRE-covered cylindrical conformal
arrays for multi-UAV networks."""

__version__ = "0.1.0"
