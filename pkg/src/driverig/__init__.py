"""Deterministic closed-loop benchmark rig for instruction-following driving agents."""

__version__ = "0.1.0"
