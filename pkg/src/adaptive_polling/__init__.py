"""Simulation and stability analysis of a three-queue polling system that skips queue 2
for one cycle after finding it empty."""

__version__ = "0.1.0"
