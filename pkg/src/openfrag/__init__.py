"""Hilbert-space fragmentation of spin-1 chains under Lindblad noise."""

__version__ = "0.1.0"
