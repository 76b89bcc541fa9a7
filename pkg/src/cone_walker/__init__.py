"""Zero-drift lattice walks killed on leaving a convex cone."""

__version__ = "0.1.0"
