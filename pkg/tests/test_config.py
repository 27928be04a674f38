import asyncio

import pytest
from pydantic import ValidationError

from models.config_model import ErrorModel, HeatmapConfig, PipelineConfig, SceneConfig
from models.errors import ConfigError
from services.config_service import USER_DATA_DIR, ConfigService, deep_merge


def load(config_file=None, overrides=None) -> PipelineConfig:
    return asyncio.run(ConfigService().initialize(config_file, overrides))


class TestDeepMerge:
    def test_nested_tables_merge(self):
        base = {"eval": {"iou_threshold": 0.5, "bands": [[0, 1]]}, "run": {"seed": 1}}
        merged = deep_merge(base, {"eval": {"iou_threshold": 0.7}})
        assert merged == {"eval": {"iou_threshold": 0.7, "bands": [[0, 1]]}, "run": {"seed": 1}}
        assert base["eval"]["iou_threshold"] == 0.5

    def test_scalars_replace_tables(self):
        assert deep_merge({"a": {"b": 1}}, {"a": 2}) == {"a": 2}


class TestConfigService:
    def test_bundled_file_matches_defaults(self):
        assert load(f"{USER_DATA_DIR}/config.toml") == PipelineConfig()

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[eval]\niou_threshold = 0.7\nassoc_distance = 5.0\n[run]\nseed = 4\n")
        config = load(str(path), {"eval": {"iou_threshold": 0.3}})
        assert config.eval.iou_threshold == 0.3
        assert config.eval.assoc_distance == 5.0
        assert config.run.seed == 4

    def test_missing_explicit_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load(str(tmp_path / "absent.toml"))

    def test_missing_default_file_uses_defaults(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CONFIG_PATH", str(tmp_path / "absent.toml"))
        assert load() == PipelineConfig()

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[eval\n")
        with pytest.raises(ConfigError):
            load(str(path))

    def test_invalid_value_names_the_field(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[eval]\niou_threshold = 1.5\n")
        with pytest.raises(ValidationError, match="iou_threshold"):
            load(str(path))

    def test_initialize_keeps_resolved_config(self):
        service = ConfigService()
        resolved = asyncio.run(service.initialize(None, {"run": {"workers": 3}}))
        assert service.config is resolved
        assert service.config.run.workers == 3


class TestModelValidation:
    def test_heatmap_defaults(self):
        config = HeatmapConfig()
        assert (config.rows, config.cols) == (30, 10)

    def test_heatmap_must_tile(self):
        with pytest.raises(ValueError):
            HeatmapConfig(cell_lateral=3.0)

    @pytest.mark.parametrize("bands", [[(10.0, 5.0)], [(-1.0, 5.0)]])
    def test_bands(self, bands):
        with pytest.raises(ValueError):
            PipelineConfig.model_validate({"eval": {"bands": bands}})

    def test_category_weights_sum_to_one(self):
        scene = SceneConfig().model_dump()
        scene["categories"][0]["weight"] = 0.1
        with pytest.raises(ValueError):
            SceneConfig.model_validate(scene)

    def test_dropout_knots_increasing(self):
        with pytest.raises(ValueError):
            ErrorModel(dropout_knots=[(100.0, 0.1), (50.0, 0.2)])
