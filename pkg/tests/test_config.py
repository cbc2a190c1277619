from __future__ import annotations

import dataclasses
import json

import pytest

from datamix.config import (
    KNOWN_KEYS,
    PipelineConfig,
    load_config,
    sampler_snapshot,
    shipped_defaults,
)
from datamix.errors import ConfigError
from datamix.sampler import StrataMode


class TestDefaults:
    def test_shipped_file_matches_dataclass(self):
        # the JSON in the package is the declared source of defaults; keep the
        # dataclass mirror from drifting
        shipped = shipped_defaults()
        assert set(shipped) == KNOWN_KEYS
        blank = PipelineConfig()
        for key, value in shipped.items():
            attr = "lam" if key == "lambda" else key
            assert getattr(blank, attr) == value, key

    def test_no_layers_gives_defaults(self):
        cfg = load_config()
        assert cfg.window_len == 50
        assert cfg.gamma == 0.1
        assert cfg.lam == 1.0
        assert cfg.alpha == 0.5
        assert cfg.smoothness == "full"
        assert cfg.min_mat_pix is None

    def test_switch_step_defaults_to_half(self):
        cfg = load_config()
        assert cfg.sampler_config().switch_step == cfg.total_steps // 2


class TestFileLayer:
    def test_file_overrides_defaults(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"gamma": 0.25, "window_len": 10}))
        cfg = load_config(p)
        assert cfg.gamma == 0.25
        assert cfg.window_len == 10
        assert cfg.lam == 1.0

    def test_lambda_key_maps_to_lam(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"lambda": 3.0}))
        assert load_config(p).lam == 3.0

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"gama": 0.2}))
        with pytest.raises(ConfigError) as exc:
            load_config(p)
        assert "gama" in str(exc.value)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_invalid_json_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_null_clears_nullable(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"min_mat_pix": None, "phase_switch_step": None}))
        cfg = load_config(p)
        assert cfg.min_mat_pix is None

    def test_null_for_required_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"gamma": None}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_type_mismatch_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"window_len": 2.5}))
        with pytest.raises(ConfigError):
            load_config(p)


class TestEnvLayer:
    def test_env_beats_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"gamma": 0.25}))
        cfg = load_config(p, env={"EMMA_GAMMA": "0.5"})
        assert cfg.gamma == 0.5

    def test_int_and_float_parsing(self):
        cfg = load_config(env={"EMMA_BATCH_SIZE": "128", "EMMA_ALPHA": "0.75"})
        assert cfg.batch_size == 128
        assert cfg.alpha == 0.75

    def test_nullable_accepts_empty_and_null(self):
        cfg = load_config(env={"EMMA_MIN_MAT_PIX": "", "EMMA_MAX_SQ_REL": "null"})
        assert cfg.min_mat_pix is None
        assert cfg.max_sq_rel is None

    def test_unknown_variable_rejected(self):
        with pytest.raises(ConfigError) as exc:
            load_config(env={"EMMA_GAMA": "0.1"})
        assert "EMMA_GAMA" in str(exc.value)

    def test_non_prefixed_variables_ignored(self):
        cfg = load_config(env={"PATH": "/bin", "HOME": "/root"})
        assert cfg.gamma == 0.1

    def test_unparsable_value_rejected(self):
        with pytest.raises(ConfigError):
            load_config(env={"EMMA_SEED": "many"})


class TestOverrideLayer:
    def test_override_beats_env(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 1}))
        cfg = load_config(p, env={"EMMA_SEED": "2"}, overrides={"seed": 3})
        assert cfg.seed == 3

    def test_lambda_override(self):
        assert load_config(overrides={"lambda": 4.0}).lam == 4.0

    def test_unknown_override_rejected(self):
        with pytest.raises(ConfigError):
            load_config(overrides={"lam": 4.0})


class TestValidation:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"window_len": 0},
            {"smoothness": "jerk"},
            {"strata_mode": "per_task"},
            {"gamma": 0.0},
            {"alpha": 2.0},
            {"total_steps": 100, "phase_switch_step": 101},
        ],
    )
    def test_bad_values_rejected(self, overrides):
        with pytest.raises(ConfigError):
            load_config(overrides=overrides)

    def test_sub_configs_constructed(self):
        cfg = load_config(overrides={"min_mat_pix": 5.0, "alpha": 0.25})
        assert cfg.filter_config().min_mat_pix == 5.0
        sc = cfg.sampler_config()
        assert sc.alpha == 0.25
        assert sc.strata_mode is StrataMode.PER_SOURCE

    def test_frozen(self):
        cfg = load_config()
        with pytest.raises(dataclasses.FrozenInstanceError):
            cfg.gamma = 0.2


class TestSnapshot:
    def test_key_order_fixed(self):
        snap = sampler_snapshot(load_config().sampler_config())
        assert list(snap) == [
            "gamma",
            "lambda",
            "alpha",
            "seed",
            "total_steps",
            "phase_switch_step",
            "batch_size",
            "strata_mode",
        ]
        assert snap["lambda"] == 1.0
        assert snap["strata_mode"] == "per_source"
        # the snapshot records the resolved switch step, not the null default
        assert snap["phase_switch_step"] == 500
