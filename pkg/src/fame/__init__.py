"""Functionality-aware evolution of segmented 3D shapes.

Evolves a small population of part-segmented meshes into generations of
cross-category hybrids via part-group exchange and insertion, scored by
pluggable category functionality models with partial matching, and
steered interactively through a design-gallery HTTP API.
"""

__version__ = "0.1.0"
