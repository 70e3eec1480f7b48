"""Symbolic caption grammar, pragmatic caption metrics and reference-game simulation
over the six-factor 3D-shapes label space."""

__version__ = "0.1.0"
