"""Declarative experiment configuration: defaults, JSON file, flag overrides.

Precedence is flags > file > defaults. The defaults reproduce the published
preprocessing parameters per dataset: 1600-point FFT, 96% frame overlap,
0 to 10 kHz band, 0.25 s segments, and a window length of 200 samples for
cwru/hust/synthetic or 180 for uored_vafcls/paderborn.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .baseline import TrainConfig
from .dsp import StftParams, hop_from_overlap
from .spectro import RenderParams


class ConfigError(Exception):
    pass


DEFAULT_WINDOW_LENGTHS: dict[str, int] = {
    "cwru": 200,
    "uored_vafcls": 180,
    "hust": 200,
    "paderborn": 180,
    "synthetic": 200,
}
DEFAULT_NFFT = 1600
DEFAULT_OVERLAP = 0.96
DEFAULT_FREQ_MAX = 10000.0
FALLBACK_WINDOW_LENGTH = 200


def default_stft_params(dataset_id: str) -> StftParams:
    window = DEFAULT_WINDOW_LENGTHS.get(dataset_id, FALLBACK_WINDOW_LENGTH)
    return StftParams(
        window_length=window,
        hop=hop_from_overlap(window, DEFAULT_OVERLAP),
        nfft=DEFAULT_NFFT,
        freq_max=DEFAULT_FREQ_MAX,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    catalog: str = "catalog.csv"
    output_dir: str = "out"
    segment_duration: float = 0.25
    rule: str = "ByLoad"  # ByLoad | BySeverity
    val_fraction: float = 0.2
    seed: int = 0
    stft_overrides: dict[str, StftParams] = field(default_factory=dict)
    render: RenderParams = field(default_factory=RenderParams)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self) -> None:
        if self.rule not in ("ByLoad", "BySeverity"):
            raise ConfigError(f"rule must be ByLoad or BySeverity, got {self.rule!r}")
        if self.segment_duration <= 0:
            raise ConfigError("segment_duration must be > 0")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")

    def stft_for(self, dataset_id: str) -> StftParams:
        return self.stft_overrides.get(dataset_id, default_stft_params(dataset_id))

    def canonical_dict(self) -> dict[str, Any]:
        return {
            "catalog": self.catalog,
            "output_dir": self.output_dir,
            "segment_duration": self.segment_duration,
            "rule": self.rule,
            "val_fraction": self.val_fraction,
            "seed": self.seed,
            "stft": {
                dataset: {
                    "window_length": p.window_length,
                    "hop": p.hop,
                    "nfft": p.nfft,
                    "freq_max": p.freq_max,
                }
                for dataset, p in sorted(self.stft_overrides.items())
            },
            "render": {
                "db_floor_epsilon": self.render.db_floor_epsilon,
                "invert": self.render.invert,
                "colormap": self.render.colormap,
                "target_height": self.render.target_height,
                "target_width": self.render.target_width,
            },
            "train": {
                "learning_rate": self.train.learning_rate,
                "max_epochs": self.train.max_epochs,
                "batch_size": self.train.batch_size,
                "l2_lambda": self.train.l2_lambda,
                "early_stop_patience": self.train.early_stop_patience,
                "lr_reduce_factor": self.train.lr_reduce_factor,
                "lr_reduce_patience": self.train.lr_reduce_patience,
                "seed": self.train.seed,
            },
        }

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


_TOP_KEYS = {
    "catalog",
    "output_dir",
    "segment_duration",
    "rule",
    "val_fraction",
    "seed",
    "stft",
    "render",
    "train",
}


def _stft_from_dict(dataset_id: str, raw: Mapping[str, Any]) -> StftParams:
    known = {"window_length", "hop", "overlap", "nfft", "freq_max"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"stft.{dataset_id}: unknown keys {sorted(unknown)}")
    base = default_stft_params(dataset_id)
    window = int(raw.get("window_length", base.window_length))
    if "hop" in raw:
        hop = int(raw["hop"])
    elif "overlap" in raw:
        hop = hop_from_overlap(window, float(raw["overlap"]))
    elif window != base.window_length:
        hop = hop_from_overlap(window, DEFAULT_OVERLAP)
    else:
        hop = base.hop
    try:
        return StftParams(
            window_length=window,
            hop=hop,
            nfft=int(raw.get("nfft", base.nfft)),
            freq_max=float(raw.get("freq_max", base.freq_max)),
        )
    except ValueError as exc:
        raise ConfigError(f"stft.{dataset_id}: {exc}") from exc


def _render_from_dict(raw: Mapping[str, Any], base: RenderParams) -> RenderParams:
    known = {"db_floor_epsilon", "invert", "colormap", "target_height", "target_width"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"render: unknown keys {sorted(unknown)}")
    try:
        return replace(base, **dict(raw))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"render: {exc}") from exc


def _train_from_dict(raw: Mapping[str, Any], base: TrainConfig) -> TrainConfig:
    known = {
        "learning_rate",
        "max_epochs",
        "batch_size",
        "l2_lambda",
        "early_stop_patience",
        "lr_reduce_factor",
        "lr_reduce_patience",
        "seed",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"train: unknown keys {sorted(unknown)}")
    try:
        return replace(base, **dict(raw))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc


def _apply_dict(config: ExperimentConfig, raw: Mapping[str, Any]) -> ExperimentConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    updates: dict[str, Any] = {}
    for key in ("catalog", "output_dir", "rule"):
        if key in raw:
            updates[key] = str(raw[key])
    for key in ("segment_duration", "val_fraction"):
        if key in raw:
            updates[key] = float(raw[key])
    if "seed" in raw:
        updates["seed"] = int(raw["seed"])
    if "stft" in raw:
        merged = dict(config.stft_overrides)
        for dataset_id, sub in raw["stft"].items():
            merged[dataset_id] = _stft_from_dict(dataset_id, sub)
        updates["stft_overrides"] = merged
    if "render" in raw:
        updates["render"] = _render_from_dict(raw["render"], config.render)
    if "train" in raw:
        updates["train"] = _train_from_dict(raw["train"], config.train)
    try:
        return replace(config, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Defaults, then the JSON file when given, then explicit overrides."""
    config = ExperimentConfig()
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        config = _apply_dict(config, raw)
    if overrides:
        config = _apply_dict(config, overrides)
    return config
