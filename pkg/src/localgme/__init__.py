"""Genuinely multipartite entangled states with fully local models, and their filtering."""

__version__ = "0.1.0"
