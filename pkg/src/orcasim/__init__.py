"""Simulation and analysis toolkit for an off-resonant cascaded absorption
(ORCA) ladder memory storing single photons from a quantum-dot source."""

__version__ = "0.1.0"
