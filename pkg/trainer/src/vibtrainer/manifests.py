"""File interfaces to the benchmark pipeline.

The trainer exchanges data with the spectrogram pipeline only through files:
an images manifest CSV (``segment_id,png_path,label,dataset_id,fold``) and a
split manifest CSV (a ``# rule=... round=... seed=...`` comment line followed
by ``segment_id,role`` rows with roles train/val/test). Both parsers live
here, together with the leakage guard that keeps pretraining corpora disjoint
from the benchmark dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import LeakageDetected, SchemaMismatch

IMAGES_HEADER = ["segment_id", "png_path", "label", "dataset_id", "fold"]
SPLIT_HEADER = ["segment_id", "role"]
SPLIT_ROLES = ("train", "val", "test")

# dataset_id of the held-out benchmark dataset; its segment ids carry the
# same token as a prefix (e.g. "cwru_105_DE#0").
BENCHMARK_DATASET_ID = "cwru"


@dataclass(frozen=True)
class ImageRow:
    segment_id: str
    png_path: Path  # resolved against the manifest's directory
    label: str
    dataset_id: str
    fold: str


@dataclass(frozen=True)
class ImagesManifest:
    path: Path
    rows: tuple[ImageRow, ...]

    def by_id(self) -> dict[str, ImageRow]:
        return {row.segment_id: row for row in self.rows}

    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({row.label for row in self.rows}))


def load_images_manifest(path: str | Path) -> ImagesManifest:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != IMAGES_HEADER:
            raise SchemaMismatch(
                f"{path}: expected header {','.join(IMAGES_HEADER)}, got {header}"
            )
        rows: list[ImageRow] = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(IMAGES_HEADER):
                raise SchemaMismatch(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            segment_id, png_path, label, dataset_id, fold = row
            if not segment_id:
                raise SchemaMismatch(f"{path}:{lineno}: empty segment_id")
            if segment_id in seen:
                raise SchemaMismatch(f"{path}:{lineno}: duplicate segment_id {segment_id!r}")
            seen.add(segment_id)
            resolved = Path(png_path)
            if not resolved.is_absolute():
                resolved = path.parent / resolved
            rows.append(ImageRow(segment_id, resolved, label, dataset_id, fold))
    if not rows:
        raise SchemaMismatch(f"{path}: manifest has no image rows")
    return ImagesManifest(path=path, rows=tuple(rows))


@dataclass(frozen=True)
class Split:
    path: Path
    rule_kind: str
    round: int
    seed: int
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


def load_split_manifest(path: str | Path) -> Split:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# rule="):
            raise SchemaMismatch(f"{path}: missing '# rule=...' comment line")
        try:
            meta = dict(item.split("=", 1) for item in first[2:].split())
            round_no = int(meta.get("round", "0"))
            seed = int(meta.get("seed", "0"))
        except ValueError:
            raise SchemaMismatch(f"{path}: malformed split comment line {first!r}") from None
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPLIT_HEADER:
            raise SchemaMismatch(
                f"{path}: expected header {','.join(SPLIT_HEADER)}, got {header}"
            )
        buckets: dict[str, list[str]] = {role: [] for role in SPLIT_ROLES}
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != 2:
                raise SchemaMismatch(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            segment_id, role = row
            if role not in buckets:
                raise SchemaMismatch(f"{path}:{lineno}: unknown role {role!r}")
            if segment_id in seen:
                raise SchemaMismatch(f"{path}:{lineno}: duplicate segment_id {segment_id!r}")
            seen.add(segment_id)
            buckets[role].append(segment_id)
    if not seen:
        raise SchemaMismatch(f"{path}: split has no segments")
    return Split(
        path=path,
        rule_kind=meta.get("rule", ""),
        round=round_no,
        seed=seed,
        train=tuple(buckets["train"]),
        val=tuple(buckets["val"]),
        test=tuple(buckets["test"]),
    )


def assert_no_benchmark_rows(manifest: ImagesManifest) -> None:
    """Abort if the manifest holds any benchmark-dataset segment.

    Pretraining inputs must stay disjoint from the evaluation dataset;
    both the dataset_id column and the segment-id prefix are checked so a
    mislabeled column cannot slip a benchmark segment through.
    """
    offenders = [
        row.segment_id
        for row in manifest.rows
        if row.dataset_id == BENCHMARK_DATASET_ID
        or row.segment_id.startswith(BENCHMARK_DATASET_ID + "_")
    ]
    if offenders:
        shown = ", ".join(offenders[:5])
        more = f" (+{len(offenders) - 5} more)" if len(offenders) > 5 else ""
        raise LeakageDetected(
            f"{manifest.path}: pretraining manifest contains "
            f"{len(offenders)} benchmark segment(s): {shown}{more}"
        )
