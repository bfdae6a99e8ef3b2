"""Tests for the YAML config loader and stage plans."""

import logging
from pathlib import Path

import pytest

from config import CONFIG_ENV_VAR, ConfigError, MissingInputError, config_from_dict, load_config
from fusion.models import BiEncoder, FusionConfig
from autodiff import TransformerConfig
from conftest import TINY_CONFIG

SHIPPED_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "synthetic.yaml"


def _write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return path


def _tiny_bi_encoder(config):
    m = config.model
    transformer = TransformerConfig(layers=m.layers, model_dim=m.model_dim, heads=m.heads, ffn_dim=m.ffn_dim)
    return BiEncoder(FusionConfig(kind="ilf", transformer=transformer, text_dim=m.model_dim, image_dim=8))


class TestLoadConfig:
    def test_shipped_config_loads(self):
        config = load_config(SHIPPED_CONFIG)
        assert config.seed == 0
        assert config.stage_plan(2, "ilf").schedule == "constant"

    def test_exponent_learning_rate_is_a_float(self, tmp_path):
        path = _write(tmp_path, "seed: 1\nstages:\n  stage2:\n    eca: {lr: 2e-5, batch_size: 8}\n")
        plan = load_config(path).stage_plan(2, "eca")
        assert plan.lr == pytest.approx(2e-5)
        assert plan.batch_size == 8
        assert plan.warmup_steps == 100

    def test_seed_is_required(self, tmp_path):
        with pytest.raises(ConfigError, match="seed is required"):
            load_config(_write(tmp_path, "model:\n  layers: 1\n"))

    def test_seed_override(self, tmp_path):
        assert load_config(_write(tmp_path, "seed: 1\n"), seed=9).seed == 9

    def test_unknown_setting_is_named(self, tmp_path):
        with pytest.raises(ConfigError, match="model.depth"):
            load_config(_write(tmp_path, "seed: 1\nmodel:\n  depth: 3\n"))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="training"):
            load_config(_write(tmp_path, "seed: 1\ntraining: {}\n"))

    def test_environment_variable(self, tmp_path, monkeypatch):
        monkeypatch.setenv(CONFIG_ENV_VAR, str(_write(tmp_path, "seed: 4\n")))
        assert load_config().seed == 4

    def test_no_config_anywhere(self, monkeypatch):
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        with pytest.raises(ConfigError):
            load_config()

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingInputError):
            load_config(tmp_path / "absent.yaml")


class TestPipelineConfig:
    def test_hash_tracks_content(self):
        first = config_from_dict(dict(TINY_CONFIG))
        assert first.config_hash() == config_from_dict(dict(TINY_CONFIG)).config_hash()
        assert first.config_hash() != first.with_seed(4).config_hash()

    def test_invalid_values(self):
        with pytest.raises(ConfigError, match="heads"):
            config_from_dict({**TINY_CONFIG, "model": {**TINY_CONFIG["model"], "heads": 3}})
        with pytest.raises(ConfigError, match="latent_dim"):
            config_from_dict({**TINY_CONFIG, "backend": {**TINY_CONFIG["backend"], "latent_dim": 9}})
        with pytest.raises(ConfigError, match="split_ratios"):
            config_from_dict({**TINY_CONFIG, "corpus": {"split_ratios": [0.5, 0.5, 0.5]}})

    def test_bad_stage_plan_is_reported_with_its_path(self):
        with pytest.raises(ConfigError, match="stages.stage2.ilf"):
            config_from_dict({"seed": 0, "stages": {"stage2": {"ilf": {"batch_size": 0}}}})

    def test_precomputed_backend_needs_a_table(self):
        with pytest.raises(ConfigError, match="image_table"):
            config_from_dict({"seed": 0, "backend": {"kind": "precomputed"}})

    def test_paths_resolve_under_root(self, tiny_config):
        assert tiny_config.paths.resolve("runs", "x.trec").parts[-3:] == ("artifacts", "runs", "x.trec")
        with pytest.raises(ConfigError):
            tiny_config.paths.resolve("root")

    def test_recipe_frozen_layers_follow_model_depth(self, caplog):
        config = config_from_dict({"seed": 0})
        plan = config.stage_plan(2, "ilf")
        assert plan.frozen_last_l == 2
        assert config.stage_plan(2, "eca").frozen_last_l == 2
        assert config.stage_plan(3, "ilf").frozen_last_l == 0
        model = _tiny_bi_encoder(config)
        with caplog.at_level(logging.WARNING, logger="fusion.models"):
            model.freeze(plan.frozen_last_l)
        assert model.question.frozen_last_l == 2
        assert "clamped" not in caplog.text

    def test_explicit_frozen_layers_clamped_to_depth(self, caplog):
        config = config_from_dict({"seed": 0, "stages": {"stage2": {"ilf": {"frozen_last_l": 12}}}})
        plan = config.stage_plan(2, "ilf")
        assert plan.frozen_last_l == 12
        model = _tiny_bi_encoder(config)
        with caplog.at_level(logging.WARNING, logger="fusion.models"):
            model.freeze(plan.frozen_last_l)
        assert model.question.frozen_last_l == config.model.layers
        assert "clamped" in caplog.text
