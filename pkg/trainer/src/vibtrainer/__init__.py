"""Deep transfer-learning trainer for bearing-vibration spectrogram images.

Consumes the spectrogram pipeline's file interfaces — an images manifest CSV
and a split manifest CSV — pretrains or fine-tunes a DenseNet-121 topology
classifier, and emits prediction CSVs in the schema the evaluation module
reads, plus weight archives and JSON training traces.
"""

__version__ = "0.1.0"

from .errors import ConfigError, LeakageDetected, SchemaMismatch, TrainerError
from .manifests import (
    ImagesManifest,
    Split,
    assert_no_benchmark_rows,
    load_images_manifest,
    load_split_manifest,
)
from .model import backbone_digest, build_network, freeze_backbone
from .registry import BATCH_SIZE, REGISTRY, HyperParams, Mode, hyperparams_for
from .train import RunResult, TrainRun, finetune_and_predict, pretrain

__all__ = [
    "BATCH_SIZE",
    "ConfigError",
    "HyperParams",
    "ImagesManifest",
    "LeakageDetected",
    "Mode",
    "REGISTRY",
    "RunResult",
    "SchemaMismatch",
    "Split",
    "TrainerError",
    "TrainRun",
    "assert_no_benchmark_rows",
    "backbone_digest",
    "build_network",
    "finetune_and_predict",
    "freeze_backbone",
    "hyperparams_for",
    "load_images_manifest",
    "load_split_manifest",
    "pretrain",
]
