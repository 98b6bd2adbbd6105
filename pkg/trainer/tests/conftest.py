"""Shared toy fixtures: small labeled PNG corpora with manifests and a split.

Images are 64x64 grayscale with a class-dependent bright band plus seeded
noise, so a classifier can separate them within a couple of epochs while the
suite stays fast on CPU. Two corpora are built: a source corpus (dataset_id
"hust", for pretraining) and a benchmark corpus (dataset_id "cwru", with a
train/val/test split for fine-tuning).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

from vibtrainer import pretrain
from vibtrainer.train import RunResult

CLASSES = ("B", "H", "I", "O")


def write_class_png(path: Path, class_index: int, noise_seed: int) -> None:
    rng = np.random.RandomState(noise_seed)
    arr = np.full((64, 64), 30.0)
    row = 8 + 12 * class_index
    arr[row : row + 6, :] = 220.0
    arr += rng.uniform(-20.0, 20.0, arr.shape)
    Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8), mode="L").save(path)


@dataclass(frozen=True)
class ToyCorpus:
    root: Path
    images_dir: Path
    source_manifest: Path  # 4 recordings x 6 segments, dataset_id "hust"
    bench_manifest: Path  # 8 recordings x 5 segments, dataset_id "cwru"
    split_manifest: Path  # 24 train / 8 val / 8 test, rule ByLoad
    split_severity: Path  # same roles, rule BySeverity
    test_ids: tuple[str, ...]  # split order
    truth: dict[str, str]  # segment_id -> label, benchmark corpus


def _build_corpus(root: Path) -> ToyCorpus:
    images_dir = root / "images"
    images_dir.mkdir(parents=True)
    noise = 0

    source_rows = ["segment_id,png_path,label,dataset_id,fold"]
    for class_index, label in enumerate(CLASSES):
        for k in range(6):
            sid = f"hust_{label.lower()}0#{k}"
            name = sid.replace("#", "_") + ".png"
            write_class_png(images_dir / name, class_index, 1000 + noise)
            noise += 1
            source_rows.append(f"{sid},images/{name},{label},hust,")
    source_manifest = root / "source.csv"
    source_manifest.write_text("\n".join(source_rows) + "\n", encoding="utf-8")

    bench_rows = ["segment_id,png_path,label,dataset_id,fold"]
    split_rows = ["# rule=ByLoad round=1 seed=0", "segment_id,role"]
    test_ids: list[str] = []
    truth: dict[str, str] = {}
    for class_index, label in enumerate(CLASSES):
        for rec in range(2):
            for k in range(5):
                sid = f"cwru_{label.lower()}{rec}_DE#{k}"
                name = sid.replace("#", "_") + ".png"
                write_class_png(images_dir / name, class_index, 2000 + noise)
                noise += 1
                bench_rows.append(f"{sid},images/{name},{label},cwru,1")
                truth[sid] = label
                role = "train" if k < 3 else ("val" if k == 3 else "test")
                split_rows.append(f"{sid},{role}")
                if role == "test":
                    test_ids.append(sid)
    bench_manifest = root / "bench.csv"
    bench_manifest.write_text("\n".join(bench_rows) + "\n", encoding="utf-8")
    split_manifest = root / "split_r1.csv"
    split_manifest.write_text("\n".join(split_rows) + "\n", encoding="utf-8")
    split_severity = root / "split_severity_r1.csv"
    severity_rows = ["# rule=BySeverity round=1 seed=0"] + split_rows[1:]
    split_severity.write_text("\n".join(severity_rows) + "\n", encoding="utf-8")

    return ToyCorpus(
        root=root,
        images_dir=images_dir,
        source_manifest=source_manifest,
        bench_manifest=bench_manifest,
        split_manifest=split_manifest,
        split_severity=split_severity,
        test_ids=tuple(test_ids),
        truth=truth,
    )


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory: pytest.TempPathFactory) -> ToyCorpus:
    return _build_corpus(tmp_path_factory.mktemp("toy_corpus"))


@pytest.fixture(scope="session")
def vibnet_run(toy_corpus: ToyCorpus, tmp_path_factory: pytest.TempPathFactory) -> RunResult:
    """One shared pretraining run; its archive feeds the *_vibnet tests."""
    out = tmp_path_factory.mktemp("vibnet")
    return pretrain(
        toy_corpus.source_manifest, out, epochs=2, lr=0.001, batch_size=8, seed=0
    )


@pytest.fixture(scope="session")
def imagenet_file(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """A stock-topology state dict stored locally, standing in for the
    published pretrained weights (which tests must not download)."""
    from torchvision.models import densenet121

    torch.manual_seed(1234)
    path = tmp_path_factory.mktemp("weights") / "imagenet_densenet121.pt"
    torch.save(densenet121(weights=None).state_dict(), path)
    return path
