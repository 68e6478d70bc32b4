"""Parallel DEVS MiniFab simulator, benchmark dataset generator and analytics."""

__version__ = "0.1.0"
