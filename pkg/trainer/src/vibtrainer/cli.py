"""Command-line interface: ``vibtrainer <subcommand>``.

Subcommands cover the two training entry points plus a registry listing:

* ``pretrain``  — train a fresh backbone on a source-corpus images manifest.
* ``finetune``  — fine-tune (or train from scratch) on a benchmark split and
  write a prediction CSV for its test set.
* ``hyperparams`` — print the published experiment grid.

Settings come from defaults, then an optional JSON config file, then flags —
later layers win. The config file uses the same key names as the spectrogram
pipeline's config where the concepts coincide (``output_dir``, ``rule``,
``seed``, ``val_fraction``), plus trainer-specific keys.

Exit codes: 0 success, 1 usage error, 2 invalid input or configuration,
3 unexpected internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from . import __version__
from .errors import ConfigError, TrainerError
from .registry import BATCH_SIZE, REGISTRY, coerce_mode, hyperparams_for
from .train import TrainRun, finetune_and_predict, pretrain


@dataclass
class TrainerConfig:
    """File-configurable settings; key names double as config-file keys."""

    output_dir: str = "runs/deep"
    rule: str = "ByLoad"
    seed: int = 0
    val_fraction: float = 0.2
    mode: str | None = None
    round: int = 1
    epochs: int | None = None
    lr: float | None = None
    batch_size: int = BATCH_SIZE
    images_manifest: str | None = None
    split_manifest: str | None = None
    imagenet_weights: str | None = None
    vibnet_archive: str | None = None
    out_predictions: str | None = None
    early_stop_patience: int = 10
    lr_patience: int = 5
    lr_factor: float = 0.1
    device: str = "cpu"


_INT_KEYS = {"seed", "round", "epochs", "batch_size", "early_stop_patience", "lr_patience"}
_FLOAT_KEYS = {"val_fraction", "lr", "lr_factor"}
_OPTIONAL_KEYS = {
    "mode",
    "epochs",
    "lr",
    "images_manifest",
    "split_manifest",
    "imagenet_weights",
    "vibnet_archive",
    "out_predictions",
}


def _apply(config: TrainerConfig, updates: dict[str, Any], origin: str) -> None:
    known = {f.name for f in fields(TrainerConfig)}
    for key, value in updates.items():
        if key not in known:
            raise ConfigError(f"{origin}: unknown config key {key!r}")
        if value is None:
            if key not in _OPTIONAL_KEYS:
                raise ConfigError(f"{origin}: key {key!r} must not be null")
        elif key in _INT_KEYS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{origin}: key {key!r} must be an integer")
        elif key in _FLOAT_KEYS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{origin}: key {key!r} must be a number")
            value = float(value)
        elif not isinstance(value, str):
            raise ConfigError(f"{origin}: key {key!r} must be a string")
        setattr(config, key, value)


def load_trainer_config(
    path: str | None, overrides: dict[str, Any] | None = None
) -> TrainerConfig:
    config = TrainerConfig()
    if path is not None:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            payload = json.loads(file_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        _apply(config, payload, str(path))
    if overrides:
        _apply(config, overrides, "command line")
    return config


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    mapping = {
        "out": "output_dir",
        "rule": "rule",
        "seed": "seed",
        "val_fraction": "val_fraction",
        "mode": "mode",
        "round": "round",
        "epochs": "epochs",
        "lr": "lr",
        "batch_size": "batch_size",
        "images": "images_manifest",
        "split": "split_manifest",
        "imagenet_weights": "imagenet_weights",
        "vibnet": "vibnet_archive",
        "out_predictions": "out_predictions",
    }
    overrides: dict[str, Any] = {}
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _require(config: TrainerConfig, key: str, flag: str) -> str:
    value = getattr(config, key)
    if value is None:
        raise ConfigError(f"{key} is required (set {flag} or the {key!r} config key)")
    return value


def cmd_pretrain(args: argparse.Namespace) -> int:
    config = load_trainer_config(args.config, _flag_overrides(args))
    result = pretrain(
        _require(config, "images_manifest", "--images"),
        config.output_dir,
        epochs=config.epochs if config.epochs is not None else 10,
        lr=config.lr if config.lr is not None else 0.001,
        batch_size=config.batch_size,
        val_fraction=config.val_fraction,
        seed=config.seed,
        early_stop_patience=config.early_stop_patience,
        lr_patience=config.lr_patience,
        lr_factor=config.lr_factor,
        device=config.device,
    )
    print(
        f"pretrained on {result.trace['train_segments']} segments "
        f"({result.trace['epochs_run']} epochs, best val loss "
        f"{result.trace['best_val_loss']:.4f}); weights at {result.archive}"
    )
    return 0


def cmd_finetune(args: argparse.Namespace) -> int:
    config = load_trainer_config(args.config, _flag_overrides(args))
    run = TrainRun(
        mode=_require(config, "mode", "--mode"),
        division=config.rule,
        round=config.round,
        images_manifest=_require(config, "images_manifest", "--images"),
        split_manifest=_require(config, "split_manifest", "--split"),
        out_dir=config.output_dir,
        epochs=config.epochs,
        lr=config.lr,
        batch_size=config.batch_size,
        seed=config.seed,
        imagenet_weights=config.imagenet_weights,
        vibnet_archive=config.vibnet_archive,
        out_predictions=config.out_predictions,
        early_stop_patience=config.early_stop_patience,
        lr_patience=config.lr_patience,
        lr_factor=config.lr_factor,
        device=config.device,
    )
    result = finetune_and_predict(run)
    trace = result.trace
    print(
        f"{trace['mode']} round {trace['round']}: trained {trace['epochs_run']} "
        f"epochs (best val loss {trace['best_val_loss']:.4f}), predicted "
        f"{trace['test_segments']} test segments into {result.predictions}"
    )
    return 0


def cmd_hyperparams(args: argparse.Namespace) -> int:
    if args.mode is not None:
        rows = hyperparams_for(args.mode, args.rule or "ByLoad")
        if args.rule is None:
            mode = coerce_mode(args.mode)
            rows = tuple(r for r in REGISTRY if r.mode is mode)
    else:
        rows = tuple(
            r for r in REGISTRY if args.rule is None or r.division == args.rule
        )
    print("division    mode                        epochs  lr      batch")
    for row in rows:
        print(
            f"{row.division:<10}  {row.mode.value:<26}  {row.epochs:>6}  "
            f"{row.initial_lr:<6}  {row.batch_size}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibtrainer",
        description="Deep transfer-learning trainer for spectrogram images",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--images", help="images manifest CSV")
    common.add_argument("--out", help="output directory")
    common.add_argument("--epochs", type=int)
    common.add_argument("--lr", type=float)
    common.add_argument("--batch-size", type=int, dest="batch_size")
    common.add_argument("--seed", type=int)

    p = sub.add_parser("pretrain", parents=[common], help="train a backbone on source corpora")
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.set_defaults(func=cmd_pretrain)

    f = sub.add_parser("finetune", parents=[common], help="fine-tune on a benchmark split")
    f.add_argument("--split", help="split manifest CSV")
    f.add_argument("--mode", help="training mode")
    f.add_argument("--rule", choices=["ByLoad", "BySeverity"], help="benchmark division")
    f.add_argument("--round", type=int)
    f.add_argument("--imagenet-weights", dest="imagenet_weights", help="local state-dict file")
    f.add_argument("--vibnet", help="pretrained weight archive")
    f.add_argument("--out-predictions", dest="out_predictions", help="prediction CSV path")
    f.set_defaults(func=cmd_finetune)

    h = sub.add_parser("hyperparams", help="print the published experiment grid")
    h.add_argument("--mode", help="filter by training mode")
    h.add_argument("--rule", choices=["ByLoad", "BySeverity"], help="filter by division")
    h.set_defaults(func=cmd_hyperparams)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 1
    try:
        return args.func(args)
    except (TrainerError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
