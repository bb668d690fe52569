"""Ergotropy-based genuine multipartite entanglement for strongly interacting systems."""

__version__ = "0.1.0"
