"""Morphotope delineation and taxonomy for building-footprint data.

The pipeline goes: footprint/street cleanup, enclosed tessellation,
59 morphometric characters per cell, contiguity-constrained Ward with
leaf extraction into morphotopes, then a hierarchical taxonomy over
morphotope profiles with flat cuts, noise assignment and evaluation
outputs.  See the stage functions in :mod:`morphotopes.pipeline` or the
``morphotopes`` CLI.
"""

from .config import PipelineConfig, load_config
from .model import NOISE, Cell, Dendrogram, Footprint, Segment, TaxonomyTree
from .characters import COLUMNS, compute_features
from .regionalize import constrained_ward, delineate_morphotopes, leaf_extract
from .taxonomy import assign_noise, build_taxonomy, flat_cut, profile_morphotopes
from .tessellation import tessellate

__all__ = [
    "COLUMNS",
    "NOISE",
    "Cell",
    "Dendrogram",
    "Footprint",
    "PipelineConfig",
    "Segment",
    "TaxonomyTree",
    "assign_noise",
    "build_taxonomy",
    "compute_features",
    "constrained_ward",
    "delineate_morphotopes",
    "flat_cut",
    "leaf_extract",
    "load_config",
    "profile_morphotopes",
    "tessellate",
]

__version__ = "0.1.0"
