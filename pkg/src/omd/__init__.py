"""Ontological multidimensional data model over Datalog+/- programs."""
from __future__ import annotations

__version__ = "0.1.0"
