"""Training runs: pretraining on source corpora and fine-tuning on benchmark
splits, with prediction export in the evaluation pipeline's CSV schema.

Both entry points train with cross-entropy and Adam, reduce the learning
rate when validation loss plateaus, stop early when it stalls, and restore
the best-validation weights before saving or predicting. Given identical
seeds and single-device execution, a run writes byte-identical outputs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import SpectrogramImages
from .errors import ConfigError, SchemaMismatch, TrainerError
from .manifests import (
    ImageRow,
    ImagesManifest,
    Split,
    assert_no_benchmark_rows,
    load_images_manifest,
    load_split_manifest,
)
from .model import (
    backbone_digest,
    build_network,
    freeze_backbone,
    load_archive_backbone,
    save_weight_archive,
)
from .registry import BATCH_SIZE, Mode, coerce_mode, hyperparams_for

MAX_ROUNDS = 4


@dataclass
class TrainRun:
    """One fine-tuning (or from-scratch) run on a benchmark split.

    ``epochs`` and ``lr`` default to the first published row for the
    (mode, division) pair; pairs without a published row are rejected.
    Modes that start from stored weights must name their source file:
    ``imagenet_weights`` for *_imagenet modes, ``vibnet_archive`` for
    *_vibnet modes.
    """

    mode: Mode | str
    division: str
    round: int
    images_manifest: str | Path
    split_manifest: str | Path
    out_dir: str | Path
    epochs: int | None = None
    lr: float | None = None
    batch_size: int = BATCH_SIZE
    seed: int = 0
    imagenet_weights: str | Path | None = None
    vibnet_archive: str | Path | None = None
    out_predictions: str | Path | None = None
    early_stop_patience: int = 10
    lr_patience: int = 5
    lr_factor: float = 0.1
    device: str = "cpu"

    def __post_init__(self) -> None:
        self.mode = coerce_mode(self.mode)
        if self.mode is Mode.PRETRAIN_VIBNET:
            raise ConfigError(
                "pretrain_vibnet is not a fine-tuning mode; use pretrain() instead"
            )
        rows = hyperparams_for(self.mode, self.division)  # rejects unpublished pairs
        if self.epochs is None:
            self.epochs = rows[0].epochs
        if self.lr is None:
            self.lr = rows[0].initial_lr
        if not isinstance(self.round, int) or not 1 <= self.round <= MAX_ROUNDS:
            raise ConfigError(f"round must be an integer in 1..{MAX_ROUNDS}, got {self.round}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.early_stop_patience < 1 or self.lr_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if not 0 < self.lr_factor < 1:
            raise ConfigError(f"lr_factor must be in (0, 1), got {self.lr_factor}")
        if self.mode.uses_imagenet and self.imagenet_weights is None:
            raise ConfigError(f"mode {self.mode.value} requires imagenet_weights")
        if self.mode.uses_vibnet and self.vibnet_archive is None:
            raise ConfigError(f"mode {self.mode.value} requires vibnet_archive")


@dataclass
class RunResult:
    predictions: Path | None
    archive: Path
    trace_path: Path
    trace: dict[str, Any] = field(repr=False)


def _seeded_loader(dataset, batch_size: int, *, shuffle: bool, seed: int) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        num_workers=0,
        generator=generator,
    )


def _mean_loss(net: nn.Module, loader: DataLoader, loss_fn, device: str) -> float:
    net.eval()
    total = 0.0
    count = 0
    with torch.no_grad():
        for images, targets in loader:
            images = images.to(device)
            targets = targets.to(device)
            loss = loss_fn(net(images), targets)
            total += loss.item() * len(targets)
            count += len(targets)
    return total / count


def _fit(
    net: nn.Module,
    train_ds: SpectrogramImages,
    val_ds: SpectrogramImages,
    *,
    epochs: int,
    lr: float,
    batch_size: int,
    seed: int,
    partial: bool,
    early_stop_patience: int,
    lr_patience: int,
    lr_factor: float,
    device: str,
) -> dict[str, Any]:
    """Train, tracking per-epoch losses; leaves ``net`` at its best-validation
    weights and returns the trace dictionary."""
    net.to(device)
    train_loader = _seeded_loader(train_ds, batch_size, shuffle=True, seed=seed)
    val_loader = _seeded_loader(val_ds, batch_size, shuffle=False, seed=seed)
    loss_fn = nn.CrossEntropyLoss()
    trainable = [p for p in net.parameters() if p.requires_grad]
    if not trainable:
        raise TrainerError("no trainable parameters")
    optimizer = torch.optim.Adam(trainable, lr=lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="min", factor=lr_factor, patience=lr_patience
    )

    best_val = float("inf")
    best_state: dict[str, torch.Tensor] | None = None
    best_epoch = 0
    stall = 0
    stopped_early = False
    history: list[dict[str, float]] = []

    for epoch in range(1, epochs + 1):
        net.train()
        if partial:
            # Frozen backbone stays in eval mode so its normalization
            # statistics cannot drift while only the head trains.
            net.features.eval()
        total = 0.0
        count = 0
        for images, targets in train_loader:
            images = images.to(device)
            targets = targets.to(device)
            optimizer.zero_grad()
            loss = loss_fn(net(images), targets)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(targets)
            count += len(targets)
        train_loss = total / count
        val_loss = _mean_loss(net, val_loader, loss_fn, device)
        scheduler.step(val_loss)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "lr": optimizer.param_groups[0]["lr"],
            }
        )
        if val_loss < best_val:
            best_val = val_loss
            best_state = {k: v.detach().clone() for k, v in net.state_dict().items()}
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= early_stop_patience:
                stopped_early = True
                break

    if best_state is not None:
        net.load_state_dict(best_state)
    return {
        "epochs": history,
        "epochs_run": len(history),
        "best_epoch": best_epoch,
        "best_val_loss": best_val,
        "stopped_early": stopped_early,
    }


def _write_trace(path: Path, trace: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trace, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_predictions(
    path: str | Path,
    segment_ids: list[str],
    labels: list[str],
    probs: torch.Tensor,
    classes: tuple[str, ...],
) -> None:
    """CSV ``segment_id,predicted_label,p_<class>...`` with probability
    columns in class order — the schema the evaluation pipeline consumes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["segment_id,predicted_label," + ",".join(f"p_{c}" for c in classes)]
    for sid, label, row in zip(segment_ids, labels, probs):
        lines.append(f"{sid},{label}," + ",".join(repr(float(p)) for p in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _rows_for(
    manifest: ImagesManifest, segment_ids: tuple[str, ...], role: str
) -> list[ImageRow]:
    by_id = manifest.by_id()
    missing = [sid for sid in segment_ids if sid not in by_id]
    if missing:
        raise SchemaMismatch(
            f"split {role} set references {len(missing)} segment(s) absent from "
            f"the images manifest: {missing[:5]}"
        )
    rows = [by_id[sid] for sid in segment_ids]
    if not rows:
        raise SchemaMismatch(f"split has no {role} segments")
    return rows


def pretrain(
    images_manifest: str | Path,
    out_dir: str | Path,
    *,
    epochs: int,
    lr: float = 0.001,
    batch_size: int = BATCH_SIZE,
    val_fraction: float = 0.2,
    seed: int = 0,
    early_stop_patience: int = 10,
    lr_patience: int = 5,
    lr_factor: float = 0.1,
    device: str = "cpu",
) -> RunResult:
    """Train a fresh backbone on a source-corpus manifest.

    The manifest must not contain benchmark-dataset segments. Validation is
    held out by whole recordings (the id prefix before ``#``) so segments of
    one recording never straddle the train/val boundary.
    """
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    if not lr > 0:
        raise ConfigError(f"lr must be positive, got {lr}")
    if not 0 < val_fraction < 1:
        raise ConfigError(f"val_fraction must be in (0, 1), got {val_fraction}")
    manifest = load_images_manifest(images_manifest)
    assert_no_benchmark_rows(manifest)

    by_recording: dict[str, list[ImageRow]] = {}
    for row in manifest.rows:
        by_recording.setdefault(row.segment_id.split("#", 1)[0], []).append(row)
    recordings = sorted(by_recording)
    if len(recordings) < 2:
        raise ConfigError(
            "pretraining needs at least two recordings so validation can hold "
            "out whole recordings"
        )
    random.Random(seed).shuffle(recordings)
    target = val_fraction * len(manifest.rows)
    val_rows: list[ImageRow] = []
    cursor = 0
    while len(val_rows) < target and cursor < len(recordings) - 1:
        val_rows.extend(by_recording[recordings[cursor]])
        cursor += 1
    train_rows = [row for rec in recordings[cursor:] for row in by_recording[rec]]

    classes = manifest.labels()
    class_to_index = {c: i for i, c in enumerate(classes)}
    torch.manual_seed(seed)
    net = build_network(len(classes))
    fit = _fit(
        net,
        SpectrogramImages(train_rows, class_to_index),
        SpectrogramImages(val_rows, class_to_index),
        epochs=epochs,
        lr=lr,
        batch_size=batch_size,
        seed=seed,
        partial=False,
        early_stop_patience=early_stop_patience,
        lr_patience=lr_patience,
        lr_factor=lr_factor,
        device=device,
    )

    out_dir = Path(out_dir)
    archive = out_dir / "vibnet.pt"
    save_weight_archive(net, classes, archive)
    trace = {
        "command": "pretrain",
        "mode": Mode.PRETRAIN_VIBNET.value,
        "images_manifest": str(manifest.path),
        "classes": list(classes),
        "train_segments": len(train_rows),
        "val_segments": len(val_rows),
        "epochs_budget": epochs,
        "initial_lr": lr,
        "batch_size": batch_size,
        "val_fraction": val_fraction,
        "seed": seed,
        **fit,
    }
    trace_path = out_dir / "vibnet_trace.json"
    _write_trace(trace_path, trace)
    return RunResult(predictions=None, archive=archive, trace_path=trace_path, trace=trace)


def finetune_and_predict(run: TrainRun) -> RunResult:
    """Fine-tune on a benchmark split and write predictions for its test set.

    For partial modes the backbone is frozen and digested before and after
    training; the digests must match or the run aborts. The prediction CSV
    covers exactly the split's test segments, in split order.
    """
    manifest = load_images_manifest(run.images_manifest)
    split = load_split_manifest(run.split_manifest)
    if split.rule_kind and split.rule_kind != run.division:
        raise SchemaMismatch(
            f"{split.path}: split was built under rule {split.rule_kind!r} "
            f"but the run's division is {run.division!r}"
        )
    train_rows = _rows_for(manifest, split.train, "train")
    val_rows = _rows_for(manifest, split.val, "val")
    test_rows = _rows_for(manifest, split.test, "test")

    classes = tuple(sorted({row.label for row in train_rows + val_rows}))
    if len(classes) < 2:
        raise SchemaMismatch(f"training split covers only classes {classes}")
    class_to_index = {c: i for i, c in enumerate(classes)}

    mode = coerce_mode(run.mode)
    torch.manual_seed(run.seed)
    if mode.uses_imagenet:
        net = build_network(len(classes), imagenet_weights=run.imagenet_weights)
        source = str(run.imagenet_weights)
    elif mode.uses_vibnet:
        net = build_network(len(classes))
        load_archive_backbone(net, run.vibnet_archive)
        source = str(run.vibnet_archive)
    else:  # from scratch
        net = build_network(len(classes))
        source = ""

    digest_pre = ""
    if mode.is_partial:
        freeze_backbone(net)
        digest_pre = backbone_digest(net)

    fit = _fit(
        net,
        SpectrogramImages(train_rows, class_to_index),
        SpectrogramImages(val_rows, class_to_index),
        epochs=run.epochs,
        lr=run.lr,
        batch_size=run.batch_size,
        seed=run.seed,
        partial=mode.is_partial,
        early_stop_patience=run.early_stop_patience,
        lr_patience=run.lr_patience,
        lr_factor=run.lr_factor,
        device=run.device,
    )

    digest_post = ""
    if mode.is_partial:
        digest_post = backbone_digest(net)
        if digest_post != digest_pre:
            raise TrainerError(
                "frozen backbone changed during partial fine-tuning: "
                f"{digest_pre} -> {digest_post}"
            )

    net.eval()
    test_loader = _seeded_loader(
        SpectrogramImages(test_rows, class_to_index),
        run.batch_size,
        shuffle=False,
        seed=run.seed,
    )
    prob_chunks: list[torch.Tensor] = []
    with torch.no_grad():
        for images, _ in test_loader:
            prob_chunks.append(torch.softmax(net(images.to(run.device)), dim=1).cpu())
    probs = torch.cat(prob_chunks, dim=0)
    predicted = [classes[int(i)] for i in probs.argmax(dim=1)]
    segment_ids = [row.segment_id for row in test_rows]

    out_dir = Path(run.out_dir)
    predictions = Path(
        run.out_predictions
        if run.out_predictions is not None
        else out_dir / f"predictions_r{run.round}.csv"
    )
    write_predictions(predictions, segment_ids, predicted, probs, classes)
    archive = out_dir / f"model_r{run.round}.pt"
    save_weight_archive(net, classes, archive)
    trace = {
        "command": "finetune",
        "mode": mode.value,
        "division": run.division,
        "round": run.round,
        "images_manifest": str(manifest.path),
        "split_manifest": str(split.path),
        "weight_source": source,
        "classes": list(classes),
        "train_segments": len(train_rows),
        "val_segments": len(val_rows),
        "test_segments": len(test_rows),
        "epochs_budget": run.epochs,
        "initial_lr": run.lr,
        "batch_size": run.batch_size,
        "seed": run.seed,
        "backbone_digest_pre": digest_pre,
        "backbone_digest_post": digest_post,
        "predictions": str(predictions),
        **fit,
    }
    trace_path = out_dir / f"trace_r{run.round}.json"
    _write_trace(trace_path, trace)
    return RunResult(
        predictions=predictions, archive=archive, trace_path=trace_path, trace=trace
    )
