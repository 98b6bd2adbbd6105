"""Configuration layering tests: defaults, JSON file, override precedence."""

from __future__ import annotations

import json

import pytest

from vibforge.config import (
    ConfigError,
    ExperimentConfig,
    default_stft_params,
    load_config,
)


def test_defaults():
    config = load_config()
    assert config == ExperimentConfig()
    assert config.catalog == "catalog.csv"
    assert config.output_dir == "out"
    assert config.rule == "ByLoad"
    assert config.val_fraction == 0.2
    assert config.seed == 0
    assert config.segment_duration == 0.25


def test_default_stft_params_per_dataset():
    for dataset, window, hop in (
        ("cwru", 200, 8),
        ("hust", 200, 8),
        ("synthetic", 200, 8),
        ("uored_vafcls", 180, 7),
        ("paderborn", 180, 7),
        ("never_heard_of_it", 200, 8),  # fallback
    ):
        params = default_stft_params(dataset)
        assert (params.window_length, params.hop) == (window, hop), dataset
        assert params.nfft == 1600
        assert params.freq_max == 10000.0


def test_file_then_override_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"seed": 5, "output_dir": "from_file", "rule": "BySeverity"}))
    config = load_config(path, {"seed": 9})
    assert config.seed == 9  # flag wins
    assert config.output_dir == "from_file"
    assert config.rule == "BySeverity"


def test_stft_section_merges_and_derives_hop(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "stft": {
                    "cwru": {"window_length": 100},
                    "hust": {"hop": 3},
                    "synthetic": {"overlap": 0.5},
                }
            }
        )
    )
    config = load_config(path)
    assert config.stft_for("cwru").hop == 4  # floor(100 * 0.04)
    assert config.stft_for("cwru").window_length == 100
    assert config.stft_for("hust").hop == 3
    assert config.stft_for("synthetic").hop == 100  # floor(200 * 0.5)
    assert config.stft_for("uored_vafcls") == default_stft_params("uored_vafcls")


def test_train_and_render_sections(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "train": {"learning_rate": 0.5, "seed": 11},
                "render": {"invert": False, "target_height": 128},
            }
        )
    )
    config = load_config(path)
    assert config.train.learning_rate == 0.5
    assert config.train.seed == 11
    assert config.render.invert is False
    assert config.render.target_height == 128
    assert config.render.target_width == 512  # untouched default


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"stft": {"cwru": {"bogus": 1}}},
        {"render": {"bogus": 1}},
        {"train": {"bogus": 1}},
        {"rule": "ByColor"},
        {"val_fraction": 0.0},
        {"val_fraction": 1.0},
        {"segment_duration": 0},
    ],
)
def test_bad_config_values_raise(tmp_path, raw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(arr)


def test_config_hash_tracks_content():
    a = load_config(None, {"seed": 1})
    b = load_config(None, {"seed": 1})
    c = load_config(None, {"seed": 2})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 64


def test_canonical_dict_lists_only_overridden_stft():
    assert load_config().canonical_dict()["stft"] == {}
    with_override = load_config(None, {"stft": {"cwru": {"hop": 2}}})
    assert list(with_override.canonical_dict()["stft"]) == ["cwru"]
