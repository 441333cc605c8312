import pytest

from domain.entities.embedding import EncoderBranch
from domain.entities.stylizer import StylizerKind
from domain.exceptions import ConfigError
from driving.cli.run_config import (RunConfig, format_pairs, load_run_config,
                                    parse_pairs, parse_stylizers)


def test_parse_pairs_skips_comments_and_blank_lines():
    text = "# run\nsteps = 10\n\nbatch_size=8  # even\nsteps=12\n"
    assert parse_pairs(text) == {"steps": "12", "batch_size": "8"}


def test_parse_pairs_rejects_malformed_lines():
    with pytest.raises(ConfigError, match="cfg:2"):
        parse_pairs("steps=1\njust words\n", "cfg")


def test_parse_stylizers_lists_valid_names():
    assert parse_stylizers("patch, moment") == [StylizerKind.PATCH_BLEND, StylizerKind.MOMENT_MATCH]
    with pytest.raises(ConfigError, match="moment, palette, patch"):
        parse_stylizers("moment,bogus")
    with pytest.raises(ConfigError):
        parse_stylizers(" , ")


def test_keys_are_routed_to_their_sections():
    config = RunConfig.from_pairs(
        {
            "steps": "5",
            "embedding_dim": "32",
            "channels": "4, 8",
            "temperature": "0.1",
            "stylizers": "palette,moment",
            "image_size": "32",
            "data_dir": "",
        }
    )
    assert config.train.steps == 5
    assert config.train.encoder.embedding_dim == 32
    assert config.train.encoder.channels == [4, 8]
    assert config.train.loss.temperature == 0.1
    assert config.train.stylizers == [StylizerKind.MOMENT_MATCH, StylizerKind.PALETTE_MAP]
    assert config.image_size == 32
    assert config.data_dir is None


def test_unknown_keys_and_invalid_values_are_config_errors():
    with pytest.raises(ConfigError, match="unknown key 'stepz'"):
        RunConfig.from_pairs({"stepz": "1"})
    with pytest.raises(ConfigError):
        RunConfig.from_pairs({"batch_size": "5"})
    with pytest.raises(ConfigError):
        RunConfig.from_pairs({"temperature": "0"})


def test_text_form_round_trips():
    config = RunConfig.from_pairs({"steps": "3", "channels": "4,6", "input_size": "16", "patch_size": "8"})
    text = config.to_text()
    assert text == format_pairs(config.to_pairs())
    assert RunConfig.from_pairs(parse_pairs(text)) == config
    lines = text.splitlines()
    assert lines == sorted(lines)
    assert "channels=4,6" in lines


def test_overrides_win_over_the_file(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("steps=40\nstylizers=moment\n")
    config = load_run_config(path, {"stylizers": "patch", "steps": None})
    assert config.train.steps == 40
    assert config.train.stylizers == [StylizerKind.PATCH_BLEND]
    with pytest.raises(ConfigError, match="Cannot read config"):
        load_run_config(tmp_path / "absent.txt")


def test_branches_key_selects_the_encoder_branches():
    config = RunConfig.from_pairs({"branches": "patch"})
    assert config.train.encoder.branches == [EncoderBranch.PATCH]
    assert "branches=patch" in config.to_text()
    with pytest.raises(ConfigError):
        RunConfig.from_pairs({"branches": "colour"})
