"""Tests for config.py."""

import pytest

from config import (
    FusionMode,
    RunConfig,
    Variant,
    dump_config,
    ledger_path,
    load_settings,
    parse_config,
    parse_config_text,
)
from errors import ConfigParseError, ConfigurationError
from models import GRID_SIZE, ShapeKind


class TestParseConfig:
    def test_empty_text_gives_defaults(self):
        assert parse_config_text("") == RunConfig()

    def test_no_path_gives_defaults(self):
        assert parse_config(None) == RunConfig()

    def test_variant_key(self):
        assert parse_config_text("variant=AV").variant is Variant.AUDIO_VISUAL
        assert parse_config_text("variant=V").variant is Variant.VISUAL

    def test_comments_and_blank_lines(self):
        config = parse_config_text("# comment\n\nseed=3\n")
        assert config.seed == 3

    def test_lists_and_bools(self):
        config = parse_config_text("strides=1,3\nsingle_view=true\nshape_kinds=sphere,l_beam")
        assert config.strides == [1, 3]
        assert config.single_view is True
        assert config.shape_kinds == [ShapeKind.SPHERE, ShapeKind.L_BEAM]

    def test_unknown_key_names_key_and_line(self, fixture_path):
        with pytest.raises(ConfigParseError) as exc_info:
            parse_config(str(fixture_path("typo.cfg")))
        assert exc_info.value.key == "varant"
        assert exc_info.value.line == 2
        assert "varant" in str(exc_info.value)

    def test_bad_value_names_key_and_line(self, fixture_path):
        with pytest.raises(ConfigParseError) as exc_info:
            parse_config(str(fixture_path("bad_value.cfg")))
        assert exc_info.value.key == "thresholds"
        assert exc_info.value.line == 3

    def test_bad_variant(self):
        with pytest.raises(ConfigParseError):
            parse_config_text("variant=AVX")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigParseError):
            parse_config(str(tmp_path / "absent.cfg"))

    def test_overrides_win(self, fixture_path):
        config = parse_config(str(fixture_path("minimal.cfg")), {"seed": 99})
        assert config.seed == 99

    def test_parse_error_exit_code(self):
        assert ConfigParseError("x").exit_code == 2

    @pytest.mark.parametrize("text", ["strides=4", "max_objects=0", "decoder_channels=1,2,3"])
    def test_range_checks(self, text):
        with pytest.raises(ConfigParseError):
            parse_config_text(text)


class TestDumpConfig:
    def test_round_trip_defaults(self):
        config = RunConfig()
        assert parse_config_text(dump_config(config)) == config

    def test_round_trip_custom(self):
        config = parse_config_text(
            "variant=A\nfusion_mode=mfb\nthresholds=0.25,0.75\ndata_dir=/tmp/data\nsingle_view=true"
        )
        assert parse_config_text(dump_config(config)) == config

    def test_none_keys_omitted(self):
        assert "checkpoint=" not in dump_config(RunConfig())


class TestDigest:
    def test_stable(self):
        assert RunConfig(seed=1).digest() == RunConfig(seed=1).digest()

    def test_threads_ignored(self):
        assert RunConfig(threads=1).digest() == RunConfig(threads=8).digest()

    def test_seed_matters(self):
        assert RunConfig(seed=1).digest() != RunConfig(seed=2).digest()


class TestRequire:
    def test_missing_key(self):
        with pytest.raises(ConfigParseError) as exc_info:
            RunConfig().require("data_dir")
        assert exc_info.value.key == "data_dir"

    def test_present_key(self):
        RunConfig(data_dir="data").require("data_dir")


class TestDerivedConfigs:
    def test_default_encoder_trace(self):
        assert RunConfig().encoder_config().trace == [88, 22, 11, 11]

    def test_default_decoder_trace(self):
        assert RunConfig().decoder3d_config().trace == [1, 2, 4, 8, 15, GRID_SIZE]

    def test_decoder2d_mirrors_encoder(self):
        config = RunConfig()
        assert config.decoder2d_config().trace == [11, 22, 88]

    @pytest.mark.parametrize(
        "mode,variant,expected",
        [
            (FusionMode.ADD, Variant.AUDIO_VISUAL, 1024),
            (FusionMode.CONCAT, Variant.AUDIO_VISUAL, 2048),
            (FusionMode.MFB, Variant.AUDIO_VISUAL, 1024),
            (FusionMode.CONCAT, Variant.VISUAL, 1024),
        ],
    )
    def test_decoder_input_dim(self, mode, variant, expected):
        config = RunConfig(fusion_mode=mode, variant=variant)
        assert config.decoder3d_config().input_dim == expected

    def test_non_positive_extent_rejected(self):
        from config import ConvSpec, EncoderConfig, build_config

        with pytest.raises(ConfigurationError):
            build_config(EncoderConfig, input_size=4, conv1=ConvSpec(kernel=9, stride=4, channels=2))

    def test_training_config_carries_seed(self):
        assert RunConfig(seed=5, strides=[2]).training_config().strides == [2]
        assert RunConfig(seed=5).training_config().seed == 5


class TestSettings:
    def test_ledger_path_from_env(self, monkeypatch):
        monkeypatch.setenv("LEDGER_PATH", "/tmp/x.db")
        assert ledger_path() == "/tmp/x.db"

    def test_ledger_path_default(self, monkeypatch):
        monkeypatch.delenv("LEDGER_PATH", raising=False)
        assert ledger_path() == "runs.db"

    def test_load_settings(self, tmp_path, monkeypatch):
        monkeypatch.delenv("LOG_FORMAT", raising=False)
        env = tmp_path / ".env"
        env.write_text("LOG_FORMAT=json\n")
        load_settings(str(env))
        import os

        assert os.environ["LOG_FORMAT"] == "json"
        monkeypatch.delenv("LOG_FORMAT")

    def test_missing_env_file_ignored(self, tmp_path):
        load_settings(str(tmp_path / "absent.env"))
