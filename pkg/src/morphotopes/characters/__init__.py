"""Morphometric characters of buildings, cells, streets and nodes."""

from .table import COLUMNS, compute_features, impute

__all__ = ["COLUMNS", "compute_features", "impute"]
