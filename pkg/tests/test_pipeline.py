import dataclasses
import json

import pandas as pd
import pytest

from morphotopes import io, pipeline
from morphotopes.model import NOISE
from conftest import pipeline_cfg


def test_run_all_produces_core_artifacts(pipeline_dir):
    out = pipeline_dir["out"]
    assert all(pipeline_dir["ran"].values())
    for name in (
        pipeline.CLEAN_BUILDINGS,
        pipeline.CLEAN_STREETS,
        pipeline.NODED_STREETS,
        pipeline.CELLS,
        pipeline.ENCLOSURES,
        pipeline.CELL_ADJ,
        pipeline.BLD_ADJ,
        pipeline.BANDWIDTHS,
        pipeline.FEATURES,
        pipeline.MORPHOTOPES,
        pipeline.DENDROGRAM,
        pipeline.PROFILES,
        pipeline.DEMOTED,
        pipeline.TAXONOMY_JSON,
        pipeline.TAXONOMY_LINKAGE,
        pipeline.TAXONOMY_STATE,
        pipeline.branches_file(2),
        pipeline.noise_file(2),
        pipeline.cell_branches_file(2),
        pipeline.CELLS_MAP,
        pipeline.GRID,
        pipeline.MANIFEST,
    ):
        assert (out / name).exists(), name


def test_second_run_skips_everything(pipeline_dir):
    ran = pipeline.run_all(pipeline_dir["cfg"])
    assert ran == {name: False for name in pipeline.STAGES}


def test_param_change_invalidates_downstream_only(pipeline_dir, tmp_path):
    # a different cut k reruns cut but not the expensive early stages
    cfg = dataclasses.replace(pipeline_dir["cfg"], cut_k=1)
    assert pipeline.run_stage(cfg, "morphotopes") is False
    assert pipeline.run_stage(cfg, "cut") is True
    assert (pipeline_dir["out"] / pipeline.branches_file(1)).exists()
    # restore the k=2 map for later tests
    assert pipeline.run_stage(pipeline_dir["cfg"], "cut") is True


def test_missing_prerequisite_raises(tmp_path):
    cfg = pipeline_cfg(tmp_path)
    with pytest.raises(pipeline.MissingArtifact) as err:
        pipeline.run_stage(cfg, "characterise")
    assert err.value.artifact == pipeline.CLEAN_BUILDINGS


def test_missing_input_paths_raise(tmp_path):
    cfg = pipeline_cfg(tmp_path, scene=None)
    with pytest.raises(pipeline.MissingArtifact) as err:
        pipeline.run_stage(cfg, "preprocess")
    assert err.value.artifact == "buildings_path"


def test_unknown_stage_rejected(tmp_path):
    with pytest.raises(ValueError):
        pipeline.run_stage(pipeline_cfg(tmp_path), "polish")


def test_map_properties(pipeline_dir):
    out = pipeline_dir["out"]
    doc = json.loads((out / pipeline.CELLS_MAP).read_text())
    labels = io.read_table(out / pipeline.MORPHOTOPES)["label"]
    cellb = io.read_table(out / pipeline.cell_branches_file(2))["branch"]
    assert len(doc["features"]) == len(labels)
    for feat in doc["features"][:20]:
        props = feat["properties"]
        assert list(props) == ["id", "morphotope", "branch_k2"]
        cid = props["id"]
        assert props["morphotope"] == int(labels[cid])
        assert props["branch_k2"] == int(cellb[cid])


def test_cell_branch_labels_cover_all_cells(pipeline_dir):
    out = pipeline_dir["out"]
    labels = io.read_table(out / pipeline.MORPHOTOPES)["label"]
    cellb = io.read_table(out / pipeline.cell_branches_file(2))["branch"]
    assert set(cellb.index) == set(labels.index)
    # default run assigns noise, so every cell lands in a real branch
    assert (cellb != NOISE).all()


def test_taxonomy_state_roundtrip(pipeline_dir):
    out = pipeline_dir["out"]
    tree, demoted = pipeline.load_tree(out)
    profiles = io.read_table(out / pipeline.PROFILES, index_col="morphotope_id")
    assert tree.dendrogram.n_leaves == len(profiles) - len(demoted)
    assert sorted(tree.morphotope_ids) == [
        int(i) for i in profiles.index if int(i) not in set(demoted)
    ]
    assert tree.profiles_z.shape == (tree.dendrogram.n_leaves, 61)


def test_grid_output_well_formed(pipeline_dir):
    doc = json.loads((pipeline_dir["out"] / pipeline.GRID).read_text())
    assert doc["type"] == "FeatureCollection"
    assert doc["features"], "scene buildings occupy at least one grid cell"
    for feat in doc["features"]:
        props = feat["properties"]
        shares = [v for k, v in props.items() if k.startswith("share_")]
        assert sum(shares) == pytest.approx(1.0)


def test_evaluate_with_external(pipeline_dir, tmp_path):
    out = pipeline_dir["out"]
    blds = io.geojson_to_footprints(out / pipeline.CLEAN_BUILDINGS)
    # split the scene down the middle into two labelled zones
    xs = [b.polygon.centroid.x for b in blds]
    mid = (min(xs) + max(xs)) / 2
    lo, hi = min(xs) - 50, max(xs) + 50
    external = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[
                        (lo, -50), (mid, -50), (mid, 250), (lo, 250), (lo, -50)
                    ]],
                },
                "properties": {"class": "west"},
            },
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [[
                        (mid, -50), (hi, -50), (hi, 250), (mid, 250), (mid, -50)
                    ]],
                },
                "properties": {"class": "east"},
            },
        ],
    }
    ext_path = tmp_path / "external.geojson"
    ext_path.write_text(json.dumps(external))
    cfg = dataclasses.replace(pipeline_dir["cfg"], external_path=str(ext_path))
    assert pipeline.run_stage(cfg, "evaluate") is True
    norm = io.read_table(out / pipeline.CONFUSION, index_col="branch")
    counts = io.read_table(out / pipeline.CONFUSION_COUNTS, index_col="branch")
    assert list(norm.columns) == ["east", "west", "unmatched"]
    assert norm.sum(axis=1).tolist() == pytest.approx([1.0] * len(norm))
    cellb = io.read_table(out / pipeline.cell_branches_file(2))["branch"]
    assert counts.to_numpy().sum() == int((cellb != NOISE).sum())
    # leave the artifact dir as the session fixture built it
    assert pipeline.run_stage(pipeline_dir["cfg"], "evaluate") is True


def test_manifest_ignores_worker_count(pipeline_dir):
    cfg = dataclasses.replace(pipeline_dir["cfg"], workers=4)
    # a pure throughput knob must not invalidate any stage
    ran = pipeline.run_all(cfg)
    assert ran == {name: False for name in pipeline.STAGES}
