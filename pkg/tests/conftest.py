"""Shared fixtures.

The expensive end-to-end objects (scene, tessellation, feature table,
morphotope labels) are built once per session and reused by the module
tests and the acceptance suite.
"""

from __future__ import annotations

import dataclasses
import time

import pytest
from shapely.geometry import LineString, Polygon

from morphotopes.characters import compute_features
from morphotopes.config import PipelineConfig, RegionalizeConfig
from morphotopes.pipeline import run_all
from morphotopes.preprocess import building_adjacency, preprocess_buildings
from morphotopes.regionalize import delineate_morphotopes
from morphotopes.scenes import generate, scene_to_dict, two_pattern_scene
from morphotopes.tessellation import (
    assign_streets,
    cell_adjacency,
    node_streets,
    tessellate,
)


def rect(x0: float, y0: float, w: float, h: float) -> Polygon:
    return Polygon([(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)])


@pytest.fixture(scope="session")
def two_pattern_run():
    """Full pipeline state for the two-pattern scene, min_size=50."""
    start = time.perf_counter()
    blds_raw, segs_raw, truth = generate(two_pattern_scene(seed=0))
    blds, _ = preprocess_buildings(blds_raw)
    assert len(blds) == len(blds_raw)  # clean scene: nothing merged or dropped
    graph = node_streets(segs_raw)
    cells, enclosures, radii = tessellate(blds, graph.segments)
    assign_streets(cells, blds, graph)
    cell_pairs = cell_adjacency(cells)
    bld_pairs = building_adjacency(blds)
    table = compute_features(blds, cells, graph, cell_pairs, bld_pairs)
    labels, dend = delineate_morphotopes(table, cell_pairs, min_size=50)
    elapsed = time.perf_counter() - start
    return {
        "elapsed": elapsed,
        "blds": blds,
        "graph": graph,
        "cells": cells,
        "enclosures": enclosures,
        "radii": radii,
        "cell_pairs": cell_pairs,
        "bld_pairs": bld_pairs,
        "table": table,
        "labels": labels,
        "dend": dend,
        "truth": truth,
        "min_size": 50,
    }


@pytest.fixture()
def corridor():
    """A straight street with parallel walls 3 m to each side."""
    street = LineString([(0, 0), (0, 30)])
    walls = [rect(3, -5, 1, 40), rect(-4, -5, 1, 40)]
    return street, walls


def pipeline_cfg(out_dir, workers: int = 1, **overrides) -> PipelineConfig:
    """Batch config for the two-pattern scene, min_size=50, two branches."""
    cfg = PipelineConfig(
        scene=scene_to_dict(two_pattern_scene()),
        out_dir=str(out_dir),
        cut_k=2,
        workers=workers,
        regionalize=RegionalizeConfig(min_size=50),
    )
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


@pytest.fixture(scope="session")
def pipeline_dir(tmp_path_factory):
    """One full batch run of the two-pattern scene, shared by file-level tests."""
    out = tmp_path_factory.mktemp("pipeline")
    cfg = pipeline_cfg(out)
    ran = run_all(cfg)
    return {"out": out, "cfg": cfg, "ran": ran}
