import json

import pytest

from morphotopes.config import (
    ConfigError,
    PipelineConfig,
    RegionalizeConfig,
    TaxonomyConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)


def test_defaults():
    cfg = PipelineConfig()
    assert cfg.regionalize.min_size == 75
    assert cfg.cut_k == 8
    assert cfg.workers == 1
    assert cfg.taxonomy.knn == 10
    assert cfg.out_dir == "artifacts"


def test_load_config_full(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "out_dir": "run1",
                "cut_k": 4,
                "seed": 7,
                "regionalize": {"min_size": 30},
                "tessellation": {"segment_step": 0.25},
                "taxonomy": {"knn": 5},
            }
        )
    )
    cfg = load_config(path)
    assert cfg.out_dir == "run1"
    assert cfg.cut_k == 4
    assert cfg.seed == 7
    assert cfg.regionalize.min_size == 30
    assert cfg.tessellation.segment_step == 0.25
    assert cfg.taxonomy.knn == 5
    # untouched blocks keep defaults
    assert cfg.preprocess.merge_small_area == 50.0


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown top-level key"):
        config_from_dict({"minimum_size": 10})


def test_unknown_section_key():
    with pytest.raises(ConfigError, match="regionalize"):
        config_from_dict({"regionalize": {"minsize": 10}})


def test_section_must_be_object():
    with pytest.raises(ConfigError):
        config_from_dict({"taxonomy": 5})


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig(cut_k=0)
    with pytest.raises(ConfigError):
        PipelineConfig(workers=0)
    with pytest.raises(ConfigError):
        PipelineConfig(grid_cell=-1.0)
    with pytest.raises(ConfigError):
        RegionalizeConfig(min_size=1)
    with pytest.raises(ConfigError):
        TaxonomyConfig(knn=0)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_roundtrip_via_dict():
    cfg = PipelineConfig(cut_k=3, scene={"blocks": []})
    again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
    assert again == cfg
