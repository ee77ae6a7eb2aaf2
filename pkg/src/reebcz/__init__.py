"""Certified Conley-Zehnder index calculus for Reeb orbits on starshaped hypersurfaces."""

__version__ = "0.1.0"
