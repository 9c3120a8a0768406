"""Staged pipeline over an artifact directory.

Every stage reads the artifacts of earlier stages from ``cfg.out_dir``,
writes its own atomically, and records a fingerprint (relevant config
plus input file hashes) in ``manifest.json``.  Re-running a stage whose
fingerprint and outputs are unchanged is a no-op, so interrupted runs
resume where they stopped.

The worker count is deliberately excluded from fingerprints: it must
never influence artifact content, only wall time.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from shapely.geometry import mapping, shape

from . import io
from .characters import compute_features
from .config import PipelineConfig, config_to_dict
from .model import NOISE, Dendrogram, Standardizer, TaxonomyTree
from .preprocess import building_adjacency, filter_segments, preprocess_buildings
from .regionalize import delineate_morphotopes
from .scenes import generate, scene_from_dict
from .taxonomy import (
    assign_noise,
    build_taxonomy,
    exclude_outliers,
    flat_cut,
    profile_morphotopes,
    taxonomy_to_json,
)
from .evaluation import cross_tabulate, grid_abundance
from .tessellation import (
    assign_streets,
    cell_adjacency,
    graph_from_noded,
    node_streets,
    tessellate,
)

RAW_BUILDINGS = "buildings_raw.geojson"
RAW_STREETS = "streets_raw.geojson"
SCENE_LABELS = "scene_labels.csv"
CLEAN_BUILDINGS = "buildings_clean.geojson"
CLEAN_STREETS = "streets_clean.geojson"
BLD_ADJ = "building_adjacency.csv"
PRE_REPORT = "preprocess_report.json"
NODED_STREETS = "streets_noded.geojson"
CELLS = "cells.geojson"
ENCLOSURES = "enclosures.geojson"
CELL_ADJ = "cell_adjacency.csv"
BANDWIDTHS = "bandwidths.csv"
FEATURES = "features.csv"
MORPHOTOPES = "morphotopes.csv"
DENDROGRAM = "dendrogram.csv"
PROFILES = "profiles.csv"
DEMOTED = "demoted.csv"
TAXONOMY_JSON = "taxonomy.json"
TAXONOMY_LINKAGE = "taxonomy_linkage.csv"
TAXONOMY_STATE = "taxonomy_state.json"
CELLS_MAP = "cells_map.geojson"
CONFUSION = "confusion.csv"
CONFUSION_COUNTS = "confusion_counts.csv"
GRID = "grid.geojson"
MANIFEST = "manifest.json"

STAGES = (
    "preprocess",
    "tessellate",
    "characterise",
    "morphotopes",
    "taxonomy",
    "cut",
    "assign-noise",
    "evaluate",
)


def branches_file(k: int) -> str:
    return f"branches_k{k}.csv"


def noise_file(k: int) -> str:
    return f"noise_k{k}.csv"


def cell_branches_file(k: int) -> str:
    return f"cell_branches_k{k}.csv"


class MissingArtifact(RuntimeError):
    """A stage prerequisite file is absent."""

    def __init__(self, artifact: str):
        super().__init__(artifact)
        self.artifact = artifact


# ---------------------------------------------------------------------------
# manifest plumbing


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_manifest(out: Path) -> dict:
    p = out / MANIFEST
    if not p.exists():
        return {}
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError:
        return {}


def _write_manifest(out: Path, data: dict) -> None:
    io.atomic_write_text(out / MANIFEST, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _section(cfg: PipelineConfig, name: str) -> dict:
    return dataclasses.asdict(getattr(cfg, name))


# ---------------------------------------------------------------------------
# stage bodies


def _stage_preprocess(cfg: PipelineConfig, out: Path) -> None:
    if cfg.scene is not None:
        data = dict(cfg.scene)
        data.setdefault("seed", cfg.seed)
        blds, segs, labels = generate(scene_from_dict(data))
        io.write_geojson(out / RAW_BUILDINGS, io.footprints_to_geojson(blds))
        io.write_geojson(out / RAW_STREETS, io.segments_to_geojson(segs))
        truth = pd.DataFrame(
            {"block": labels}, index=pd.Index([b.id for b in blds], name="footprint_id")
        )
        io.write_table(truth, out / SCENE_LABELS, index_label="footprint_id")
    else:
        blds = io.load_footprints(cfg.buildings_path)
        segs = io.load_segments(cfg.segments_path)
    clean, report = preprocess_buildings(blds, cfg.preprocess)
    streets, seg_report = filter_segments(segs)
    adj = building_adjacency(clean, cfg.preprocess.adjacency_tol)
    io.write_geojson(out / CLEAN_BUILDINGS, io.footprints_to_geojson(clean))
    io.write_geojson(out / CLEAN_STREETS, io.segments_to_geojson(streets))
    io.write_edge_list(adj, out / BLD_ADJ)
    summary = dataclasses.asdict(report)
    summary["filtered_segments"] = seg_report.filtered_segments
    io.atomic_write_text(out / PRE_REPORT, json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _stage_tessellate(cfg: PipelineConfig, out: Path) -> None:
    blds = io.geojson_to_footprints(out / CLEAN_BUILDINGS)
    segs = io.geojson_to_segments(out / CLEAN_STREETS)
    graph = node_streets(segs)
    cells, enclosures, radii = tessellate(blds, graph.segments, cfg.tessellation)
    assign_streets(cells, blds, graph)
    pairs = cell_adjacency(cells)
    io.write_geojson(out / NODED_STREETS, io.segments_to_geojson(graph.segments))
    io.write_geojson(out / CELLS, io.cells_to_geojson(cells))
    enc_feats = [
        {"type": "Feature", "geometry": mapping(poly), "properties": {"id": i}}
        for i, poly in enumerate(enclosures)
    ]
    io.write_geojson(out / ENCLOSURES, io.feature_collection(enc_feats))
    io.write_edge_list(pairs, out / CELL_ADJ)
    bw = pd.DataFrame({"bandwidth": pd.Series(radii, dtype=float)})
    io.write_table(bw, out / BANDWIDTHS, index_label="footprint_id")


def _stage_characterise(cfg: PipelineConfig, out: Path) -> None:
    blds = io.geojson_to_footprints(out / CLEAN_BUILDINGS)
    cells = io.geojson_to_cells(out / CELLS)
    graph = graph_from_noded(io.geojson_to_segments(out / NODED_STREETS))
    cell_pairs = io.read_edge_list(out / CELL_ADJ)
    bld_pairs = io.read_edge_list(out / BLD_ADJ)
    table = compute_features(
        blds, cells, graph, cell_pairs, bld_pairs, cfg.characters, workers=cfg.workers
    )
    io.write_table(table, out / FEATURES)


def _stage_morphotopes(cfg: PipelineConfig, out: Path) -> None:
    table = io.read_table(out / FEATURES)
    pairs = io.read_edge_list(out / CELL_ADJ)
    labels, dend = delineate_morphotopes(table, pairs, cfg.regionalize.min_size)
    io.write_table(labels.astype(int).to_frame(), out / MORPHOTOPES)
    io.write_dendrogram(dend.merges, out / DENDROGRAM)


def _stage_taxonomy(cfg: PipelineConfig, out: Path) -> None:
    labels = io.read_table(out / MORPHOTOPES)["label"]
    table = io.read_table(out / FEATURES)
    blds = io.geojson_to_footprints(out / CLEAN_BUILDINGS)
    fp = {b.id: b.polygon for b in blds}
    bld_pairs = io.read_edge_list(out / BLD_ADJ)
    profiles = profile_morphotopes(labels, table, fp, bld_pairs)
    kept, demoted = exclude_outliers(profiles, cfg.taxonomy)
    tree = build_taxonomy(kept, cfg.taxonomy)
    io.write_table(profiles, out / PROFILES, index_label="morphotope_id")
    io.atomic_write_text(
        out / DEMOTED, "morphotope_id\n" + "".join(f"{i}\n" for i in demoted)
    )
    io.atomic_write_text(
        out / TAXONOMY_JSON, json.dumps(taxonomy_to_json(tree), indent=2) + "\n"
    )
    io.write_dendrogram(tree.dendrogram.merges, out / TAXONOMY_LINKAGE)
    state = {
        "n_leaves": tree.dendrogram.n_leaves,
        "merges": tree.dendrogram.merges.tolist(),
        "morphotope_ids": tree.morphotope_ids,
        "scaler": {
            "columns": tree.standardizer.columns,
            "mean": tree.standardizer.mean.tolist(),
            "std": tree.standardizer.std.tolist(),
        },
        "profiles_z": tree.profiles_z.tolist(),
        "demoted": demoted,
    }
    io.atomic_write_text(out / TAXONOMY_STATE, json.dumps(state, sort_keys=True) + "\n")


def load_tree(out: Path) -> tuple[TaxonomyTree, list[int]]:
    """Rehydrate the taxonomy (tree, demoted morphotope ids) from disk."""
    data = json.loads((out / TAXONOMY_STATE).read_text())
    dend = Dendrogram(
        n_leaves=int(data["n_leaves"]),
        merges=np.array(data["merges"], dtype=float).reshape(-1, 4),
    )
    scaler = Standardizer(
        columns=list(data["scaler"]["columns"]),
        mean=np.array(data["scaler"]["mean"], dtype=float),
        std=np.array(data["scaler"]["std"], dtype=float),
    )
    tree = TaxonomyTree(
        dendrogram=dend,
        morphotope_ids=[int(i) for i in data["morphotope_ids"]],
        standardizer=scaler,
        profiles_z=np.array(data["profiles_z"], dtype=float),
    )
    return tree, [int(i) for i in data["demoted"]]


def emit_map(
    labels: pd.Series,
    cells: list,
    path: str | Path,
    k: int | None = None,
    morph_branches: pd.Series | None = None,
    noise_branches: pd.Series | None = None,
) -> dict:
    """Write the per-cell result map as GeoJSON and return it.

    Each feature carries ``id``, ``morphotope`` (NOISE for unassigned
    cells) and, when a cut is supplied, ``branch_k{K}``: the branch of
    the cell's morphotope, or the branch assigned to its noise patch,
    or NOISE.  Property order is fixed.
    """
    feats = []
    for cell in sorted(cells, key=lambda c: c.id):
        morph = int(labels.get(cell.id, NOISE))
        props: dict = {"id": cell.id, "morphotope": morph}
        if k is not None:
            branch = NOISE
            if morph_branches is not None and morph in morph_branches.index:
                branch = int(morph_branches[morph])
            elif noise_branches is not None and cell.id in noise_branches.index:
                branch = int(noise_branches[cell.id])
            props[f"branch_k{k}"] = branch
        feats.append(
            {"type": "Feature", "geometry": mapping(cell.polygon), "properties": props}
        )
    collection = io.feature_collection(feats)
    io.write_geojson(path, collection)
    return collection


def _refresh_map(cfg: PipelineConfig, out: Path) -> None:
    cells = io.geojson_to_cells(out / CELLS)
    labels = io.read_table(out / MORPHOTOPES)["label"]
    k = cfg.cut_k
    branches = io.read_table(out / branches_file(k), index_col="morphotope_id")["branch"]
    _, demoted = load_tree(out)
    kept_branches = branches.drop(index=[i for i in demoted if i in branches.index])
    noise_path = out / noise_file(k)
    noise = None
    if noise_path.exists():
        nf = io.read_table(noise_path)
        noise = nf["branch"] if "branch" in nf.columns else None
    eff = labels.where(~labels.isin(demoted), NOISE)
    emit_map(eff, cells, out / CELLS_MAP, k=k, morph_branches=kept_branches, noise_branches=noise)


def _stage_cut(cfg: PipelineConfig, out: Path) -> None:
    tree, _ = load_tree(out)
    branches = flat_cut(tree, cfg.cut_k)
    io.write_table(
        branches.astype(int).to_frame(), out / branches_file(cfg.cut_k), index_label="morphotope_id"
    )
    _refresh_map(cfg, out)


def _stage_assign_noise(cfg: PipelineConfig, out: Path) -> None:
    k = cfg.cut_k
    labels = io.read_table(out / MORPHOTOPES)["label"]
    tree, demoted = load_tree(out)
    eff = labels.where(~labels.isin(demoted), NOISE).astype(int)
    table = io.read_table(out / FEATURES)
    cell_pairs = io.read_edge_list(out / CELL_ADJ)
    blds = io.geojson_to_footprints(out / CLEAN_BUILDINGS)
    fp = {b.id: b.polygon for b in blds}
    bld_pairs = io.read_edge_list(out / BLD_ADJ)
    noise = assign_noise(
        eff,
        cell_pairs,
        table,
        fp,
        bld_pairs,
        tree,
        k,
        nn=cfg.taxonomy.noise_nn,
        discard=cfg.discard_noise,
    )
    frame = noise.astype(int).to_frame() if len(noise) else pd.DataFrame(columns=["branch"])
    io.write_table(frame, out / noise_file(k))
    branches = io.read_table(out / branches_file(k), index_col="morphotope_id")["branch"]
    demoted_set = set(demoted)
    combined = {}
    for cid, morph in eff.items():
        if morph != NOISE and morph not in demoted_set and morph in branches.index:
            combined[cid] = int(branches[morph])
        elif cid in noise.index:
            combined[cid] = int(noise[cid])
        else:
            combined[cid] = NOISE
    cellb = pd.Series(combined, name="branch").sort_index()
    io.write_table(cellb.to_frame(), out / cell_branches_file(k))
    _refresh_map(cfg, out)


def _load_external(path: str) -> list[tuple[object, str]]:
    """Labelled polygons: each feature needs a ``class`` property."""
    data = json.loads(Path(path).read_text())
    out: list[tuple[object, str]] = []
    for i, feat in enumerate(data.get("features", [])):
        props = feat.get("properties") or {}
        if "class" not in props:
            raise io.LoadError(f"external feature {i} lacks a 'class' property")
        geom = shape(feat["geometry"])
        out.append((geom, str(props["class"])))
    return out


def _stage_evaluate(cfg: PipelineConfig, out: Path) -> None:
    k = cfg.cut_k
    cellb = io.read_table(out / cell_branches_file(k))["branch"]
    blds = io.geojson_to_footprints(out / CLEAN_BUILDINGS)
    points = {b.id: b.polygon.representative_point() for b in blds}
    classified = cellb[cellb != NOISE]
    grid = grid_abundance({i: points[i] for i in classified.index}, classified, cfg.grid_cell)
    io.write_geojson(out / GRID, grid)
    if cfg.external_path:
        external = _load_external(cfg.external_path)
        norm, counts = cross_tabulate(
            {i: points[i] for i in classified.index}, classified, external
        )
        io.write_table(norm, out / CONFUSION, index_label="branch")
        io.write_table(counts, out / CONFUSION_COUNTS, index_label="branch")


# ---------------------------------------------------------------------------
# stage registry and runner


@dataclass(frozen=True)
class _Stage:
    func: Callable[[PipelineConfig, Path], None]
    inputs: Callable[[PipelineConfig], list[str]]
    outputs: Callable[[PipelineConfig], list[str]]
    params: Callable[[PipelineConfig], dict]


def _preprocess_inputs(cfg: PipelineConfig) -> list[str]:
    if cfg.scene is not None:
        return []
    missing = [n for n in ("buildings_path", "segments_path") if not getattr(cfg, n)]
    if missing:
        raise MissingArtifact(missing[0])
    return [cfg.buildings_path, cfg.segments_path]


_REGISTRY: dict[str, _Stage] = {
    "preprocess": _Stage(
        _stage_preprocess,
        _preprocess_inputs,
        lambda cfg: [CLEAN_BUILDINGS, CLEAN_STREETS, BLD_ADJ, PRE_REPORT]
        + ([RAW_BUILDINGS, RAW_STREETS, SCENE_LABELS] if cfg.scene is not None else []),
        lambda cfg: {
            "preprocess": _section(cfg, "preprocess"),
            "scene": cfg.scene,
            "seed": cfg.seed,
        },
    ),
    "tessellate": _Stage(
        _stage_tessellate,
        lambda cfg: [CLEAN_BUILDINGS, CLEAN_STREETS],
        lambda cfg: [NODED_STREETS, CELLS, ENCLOSURES, CELL_ADJ, BANDWIDTHS],
        lambda cfg: {"tessellation": _section(cfg, "tessellation")},
    ),
    "characterise": _Stage(
        _stage_characterise,
        lambda cfg: [CLEAN_BUILDINGS, CELLS, NODED_STREETS, CELL_ADJ, BLD_ADJ],
        lambda cfg: [FEATURES],
        lambda cfg: {"characters": _section(cfg, "characters")},
    ),
    "morphotopes": _Stage(
        _stage_morphotopes,
        lambda cfg: [FEATURES, CELL_ADJ],
        lambda cfg: [MORPHOTOPES, DENDROGRAM],
        lambda cfg: {"regionalize": _section(cfg, "regionalize")},
    ),
    "taxonomy": _Stage(
        _stage_taxonomy,
        lambda cfg: [MORPHOTOPES, FEATURES, CLEAN_BUILDINGS, BLD_ADJ],
        lambda cfg: [PROFILES, DEMOTED, TAXONOMY_JSON, TAXONOMY_LINKAGE, TAXONOMY_STATE],
        lambda cfg: {"taxonomy": _section(cfg, "taxonomy")},
    ),
    "cut": _Stage(
        _stage_cut,
        lambda cfg: [TAXONOMY_STATE, MORPHOTOPES, CELLS],
        lambda cfg: [branches_file(cfg.cut_k), CELLS_MAP],
        lambda cfg: {"cut_k": cfg.cut_k},
    ),
    "assign-noise": _Stage(
        _stage_assign_noise,
        lambda cfg: [
            MORPHOTOPES,
            branches_file(cfg.cut_k),
            FEATURES,
            CELL_ADJ,
            CLEAN_BUILDINGS,
            BLD_ADJ,
            TAXONOMY_STATE,
        ],
        lambda cfg: [noise_file(cfg.cut_k), cell_branches_file(cfg.cut_k), CELLS_MAP],
        lambda cfg: {
            "cut_k": cfg.cut_k,
            "noise_nn": cfg.taxonomy.noise_nn,
            "discard_noise": cfg.discard_noise,
        },
    ),
    "evaluate": _Stage(
        _stage_evaluate,
        lambda cfg: [cell_branches_file(cfg.cut_k), CLEAN_BUILDINGS]
        + ([cfg.external_path] if cfg.external_path else []),
        lambda cfg: [GRID] + ([CONFUSION, CONFUSION_COUNTS] if cfg.external_path else []),
        lambda cfg: {
            "cut_k": cfg.cut_k,
            "grid_cell": cfg.grid_cell,
            "external_path": cfg.external_path,
        },
    ),
}


def _resolve_input(out: Path, name: str) -> Path:
    p = Path(name)
    if p.is_absolute() or len(p.parts) > 1:
        return p
    return out / name


def run_stage(cfg: PipelineConfig, name: str, force: bool = False) -> bool:
    """Run one stage; returns True if it ran, False if skipped.

    Raises MissingArtifact when a prerequisite file is absent.
    """
    if name not in _REGISTRY:
        raise ValueError(f"unknown stage '{name}'")
    st = _REGISTRY[name]
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    input_paths = []
    for raw in st.inputs(cfg):
        p = _resolve_input(out, raw)
        if not p.exists():
            raise MissingArtifact(raw)
        input_paths.append((raw, p))
    stamp = {
        "params": st.params(cfg),
        "inputs": {raw: _sha256(p) for raw, p in input_paths},
    }
    stamp = json.loads(json.dumps(stamp, sort_keys=True))

    manifest = _read_manifest(out)
    outputs = [out / n for n in st.outputs(cfg)]
    if not force and manifest.get(name) == stamp and all(p.exists() for p in outputs):
        return False

    st.func(cfg, out)
    manifest = _read_manifest(out)
    manifest[name] = stamp
    _write_manifest(out, manifest)
    return True


def run_all(cfg: PipelineConfig, force: bool = False) -> dict[str, bool]:
    """All stages in order; returns stage name -> ran flag."""
    return {name: run_stage(cfg, name, force=force) for name in STAGES}
