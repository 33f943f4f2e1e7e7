"""Energy-based physics-informed displacement solver for Fin Ray fingers."""
__version__ = "0.1.0"
