"""Dataset registry: recording metadata, catalog manifests, and file-name adapters.

A catalog is a flat table of recordings plus a map of dataset descriptors.
Manifests are plain CSV (one row per recording, one channel per row) with a
companion JSON file for the descriptors, so experiment inputs stay diffable.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

CATALOG_HEADER = [
    "recording_id",
    "dataset_id",
    "equipment",
    "sampling_rate_hz",
    "duration_s",
    "shaft_speed_rpm",
    "load_value",
    "load_unit",
    "sensor_position",
    "label",
    "severity_value",
    "severity_unit",
    "source_file",
    "channel_pattern",
]


class CatalogError(Exception):
    """Base class for catalog validation failures."""


class SchemaError(CatalogError):
    """Manifest shape is wrong: missing/extra field, unknown dataset, bad value."""


class InvariantViolation(CatalogError):
    """A row is well-formed but breaks a catalog invariant."""


class AdapterParseError(CatalogError):
    """A file name does not belong to the adapter's documented grammar."""


class HealthLabel(enum.Enum):
    H = "H"  # healthy
    I = "I"  # inner race
    O = "O"  # outer race
    B = "B"  # ball
    C = "C"  # cage
    X = "X"  # compound / multiple faults


BENCHMARK_LABELS = frozenset({HealthLabel.H, HealthLabel.I, HealthLabel.O, HealthLabel.B})


@dataclass(frozen=True)
class RecordingMeta:
    """Provenance and operating conditions of one sensor channel of one record."""

    recording_id: str
    dataset_id: str
    equipment: str
    sampling_rate: float
    duration: float
    shaft_speed: float | None
    load_value: float | None
    load_unit: str
    sensor_position: str
    label: HealthLabel
    severity_value: str
    severity_unit: str
    source_file: str
    channel_pattern: str

    def __post_init__(self) -> None:
        if self.sampling_rate <= 0:
            raise InvariantViolation(f"{self.recording_id}: sampling_rate must be > 0")
        if self.duration <= 0:
            raise InvariantViolation(f"{self.recording_id}: duration must be > 0")
        has_severity = self.severity_value != ""
        if (self.label is HealthLabel.H) == has_severity:
            raise InvariantViolation(
                f"{self.recording_id}: label {self.label.value} inconsistent with "
                f"severity {self.severity_value!r} (healthy <=> no severity)"
            )

    def numeric_severity(self) -> float | None:
        """Severity as a float when the stored code is numeric, else None."""
        if self.severity_value == "":
            return None
        try:
            return float(self.severity_value)
        except ValueError:
            return None


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    citation: str
    default_sampling_rates: tuple[float, ...]


BUILTIN_DATASETS: dict[str, DatasetDescriptor] = {
    "cwru": DatasetDescriptor(
        name="Case Western Reserve University bearing data",
        citation="CWRU Bearing Data Center",
        default_sampling_rates=(12000.0, 48000.0),
    ),
    "uored_vafcls": DatasetDescriptor(
        name="University of Ottawa rolling-element dataset (UORED-VAFCLS)",
        citation="Sehri & Dumond, Data in Brief",
        default_sampling_rates=(42000.0,),
    ),
    "hust": DatasetDescriptor(
        name="HUST bearing dataset",
        citation="Thuan & Hong, HUST bearing datasets",
        default_sampling_rates=(51200.0,),
    ),
    "paderborn": DatasetDescriptor(
        name="Paderborn University KAt bearing dataset",
        citation="Lessmeier et al., PHM Society",
        default_sampling_rates=(64000.0,),
    ),
    "synthetic": DatasetDescriptor(
        name="Deterministic synthetic bearing signals",
        citation="generated locally",
        default_sampling_rates=(8000.0,),
    ),
}


@dataclass(frozen=True)
class Catalog:
    datasets: dict[str, DatasetDescriptor]
    recordings: tuple[RecordingMeta, ...]

    def __post_init__(self) -> None:
        seen: set[tuple[str, str, str]] = set()
        ids: set[str] = set()
        for rec in self.recordings:
            if rec.dataset_id not in self.datasets:
                raise SchemaError(
                    f"{rec.recording_id}: unknown dataset_id {rec.dataset_id!r}"
                )
            key = (rec.dataset_id, rec.source_file, rec.sensor_position)
            if key in seen:
                raise InvariantViolation(
                    f"duplicate (dataset, source_file, sensor) triple: {key}"
                )
            seen.add(key)
            if rec.recording_id in ids:
                raise InvariantViolation(f"duplicate recording_id {rec.recording_id!r}")
            ids.add(rec.recording_id)


def _format_optional_float(value: float | None) -> str:
    return "" if value is None else repr(value)


def _row_of(rec: RecordingMeta) -> list[str]:
    return [
        rec.recording_id,
        rec.dataset_id,
        rec.equipment,
        repr(rec.sampling_rate),
        repr(rec.duration),
        _format_optional_float(rec.shaft_speed),
        _format_optional_float(rec.load_value),
        rec.load_unit,
        rec.sensor_position,
        rec.label.value,
        rec.severity_value,
        rec.severity_unit,
        rec.source_file,
        rec.channel_pattern,
    ]


def _parse_float(text: str, row_num: int, field_name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"row {row_num}: field {field_name!r} is not numeric: {text!r}")


def _rec_of_row(row: dict[str, str], row_num: int) -> RecordingMeta:
    label_text = row["label"]
    try:
        label = HealthLabel(label_text)
    except ValueError:
        raise SchemaError(f"row {row_num}: field 'label' has unknown value {label_text!r}")
    shaft = row["shaft_speed_rpm"]
    load = row["load_value"]
    try:
        return RecordingMeta(
            recording_id=row["recording_id"],
            dataset_id=row["dataset_id"],
            equipment=row["equipment"],
            sampling_rate=_parse_float(row["sampling_rate_hz"], row_num, "sampling_rate_hz"),
            duration=_parse_float(row["duration_s"], row_num, "duration_s"),
            shaft_speed=None if shaft == "" else _parse_float(shaft, row_num, "shaft_speed_rpm"),
            load_value=None if load == "" else _parse_float(load, row_num, "load_value"),
            load_unit=row["load_unit"],
            sensor_position=row["sensor_position"],
            label=label,
            severity_value=row["severity_value"],
            severity_unit=row["severity_unit"],
            source_file=row["source_file"],
            channel_pattern=row["channel_pattern"],
        )
    except InvariantViolation as exc:
        raise InvariantViolation(f"row {row_num}: {exc}") from None


def _companion_path(path: Path) -> Path:
    return path.with_name(path.stem + ".datasets.json")


def load_catalog(path: str | Path) -> Catalog:
    """Read a catalog manifest CSV plus its companion dataset-descriptor JSON.

    Unknown descriptor files fall back to the builtin dataset table, so a bare
    CSV that only references well-known dataset ids loads on its own.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty catalog file")
        if header != CATALOG_HEADER:
            missing = [c for c in CATALOG_HEADER if c not in header]
            extra = [c for c in header if c not in CATALOG_HEADER]
            raise SchemaError(
                f"bad catalog header: missing fields {missing}, unexpected fields {extra}"
            )
        recordings = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CATALOG_HEADER):
                raise SchemaError(
                    f"row {row_num}: expected {len(CATALOG_HEADER)} fields, got {len(row)}"
                )
            recordings.append(_rec_of_row(dict(zip(CATALOG_HEADER, row)), row_num))

    datasets = dict(BUILTIN_DATASETS)
    companion = _companion_path(path)
    if companion.exists():
        raw = json.loads(companion.read_text(encoding="utf-8"))
        for dataset_id, desc in raw.items():
            datasets[dataset_id] = DatasetDescriptor(
                name=desc["name"],
                citation=desc["citation"],
                default_sampling_rates=tuple(float(r) for r in desc["default_sampling_rates"]),
            )
    return Catalog(datasets=datasets, recordings=tuple(recordings))


def save_catalog(catalog: Catalog, path: str | Path) -> None:
    """Write the manifest CSV and companion JSON. load_catalog(save) round-trips."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for rec in catalog.recordings:
            writer.writerow(_row_of(rec))
    descriptors = {
        dataset_id: {
            "name": desc.name,
            "citation": desc.citation,
            "default_sampling_rates": list(desc.default_sampling_rates),
        }
        for dataset_id, desc in sorted(catalog.datasets.items())
    }
    _companion_path(path).write_text(
        json.dumps(descriptors, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def catalog_hash(catalog: Catalog) -> str:
    """Order-independent SHA-256 over the canonical row serialization."""
    rows = sorted(",".join(_row_of(rec)) for rec in catalog.recordings)
    digest = hashlib.sha256("\n".join(rows).encode("utf-8"))
    return digest.hexdigest()


_QUERY_FIELDS = {
    "recording_id",
    "dataset_id",
    "equipment",
    "sampling_rate",
    "duration",
    "shaft_speed",
    "load_value",
    "load_unit",
    "sensor_position",
    "label",
    "severity_value",
    "severity_unit",
    "source_file",
    "channel_pattern",
}


def query(catalog: Catalog, **filters) -> list[RecordingMeta]:
    """Recordings matching the conjunction of field filters, in recording_id order."""
    for name in filters:
        if name not in _QUERY_FIELDS:
            raise ValueError(f"unknown filter field {name!r}")
    if "label" in filters and isinstance(filters["label"], str):
        filters["label"] = HealthLabel(filters["label"])
    out = [
        rec
        for rec in catalog.recordings
        if all(getattr(rec, name) == value for name, value in filters.items())
    ]
    return sorted(out, key=lambda rec: rec.recording_id)


# --- file-name adapters -----------------------------------------------------

@dataclass(frozen=True)
class StemInfo:
    """Metadata recoverable from a file name alone (duration comes from the file)."""

    label: HealthLabel
    severity_value: str
    severity_unit: str
    load_value: float | None
    load_unit: str
    shaft_speed: float | None
    sampling_rate: float
    equipment: str


@dataclass(frozen=True)
class DatasetAdapter:
    dataset_id: str
    default_sampling_rates: tuple[float, ...]
    # (glob over variable names, sensor position) pairs, tried in order
    channel_patterns: tuple[tuple[str, str], ...]
    parse_stem: Callable[[str], StemInfo]

    def describe(self) -> DatasetDescriptor:
        return BUILTIN_DATASETS[self.dataset_id]


# CWRU distributes bare numeric stems; the hosting tables define the metadata.
# Key: record id -> (label, severity inches, load hp, sampling rate Hz).
# Loads 0..3 hp correspond to nominal shaft speeds 1797/1772/1750/1730 RPM.
_CWRU_RPM = {0: 1797.0, 1: 1772.0, 2: 1750.0, 3: 1730.0}


def _cwru_block(first: int, label: str, severity: str, rate: float, ids=None):
    ids = ids if ids is not None else range(first, first + 4)
    return {
        rec_id: (label, severity, float(load), rate)
        for load, rec_id in enumerate(ids)
    }


_CWRU_TABLE: dict[int, tuple[str, str, float, float]] = {}
# Normal baseline, 48 kHz.
_CWRU_TABLE.update(_cwru_block(97, "H", "", 48000.0))
# 12 kHz drive-end fault records.
_CWRU_TABLE.update(_cwru_block(105, "I", "0.007", 12000.0))
_CWRU_TABLE.update(_cwru_block(169, "I", "0.014", 12000.0))
_CWRU_TABLE.update(_cwru_block(209, "I", "0.021", 12000.0))
_CWRU_TABLE.update(_cwru_block(3001, "I", "0.028", 12000.0))
_CWRU_TABLE.update(_cwru_block(118, "B", "0.007", 12000.0))
_CWRU_TABLE.update(_cwru_block(185, "B", "0.014", 12000.0))
_CWRU_TABLE.update(_cwru_block(222, "B", "0.021", 12000.0))
_CWRU_TABLE.update(_cwru_block(3005, "B", "0.028", 12000.0))
_CWRU_TABLE.update(_cwru_block(130, "O", "0.007", 12000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(144, "O", "0.007", 12000.0))  # @3:00
_CWRU_TABLE.update(_cwru_block(156, "O", "0.007", 12000.0))  # @12:00
_CWRU_TABLE.update(_cwru_block(197, "O", "0.014", 12000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(234, "O", "0.021", 12000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(246, "O", "0.021", 12000.0))  # @3:00
_CWRU_TABLE.update(_cwru_block(258, "O", "0.021", 12000.0))  # @12:00
# 48 kHz drive-end fault records.
_CWRU_TABLE.update(_cwru_block(109, "I", "0.007", 48000.0))
_CWRU_TABLE.update(_cwru_block(174, "I", "0.014", 48000.0))
_CWRU_TABLE.update(_cwru_block(213, "I", "0.021", 48000.0, ids=(213, 214, 215, 217)))
_CWRU_TABLE.update(_cwru_block(122, "B", "0.007", 48000.0))
_CWRU_TABLE.update(_cwru_block(189, "B", "0.014", 48000.0))
_CWRU_TABLE.update(_cwru_block(226, "B", "0.021", 48000.0))
_CWRU_TABLE.update(_cwru_block(135, "O", "0.007", 48000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(148, "O", "0.007", 48000.0))  # @3:00
_CWRU_TABLE.update(_cwru_block(161, "O", "0.007", 48000.0))  # @12:00
_CWRU_TABLE.update(_cwru_block(201, "O", "0.014", 48000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(238, "O", "0.021", 48000.0))  # @6:00
_CWRU_TABLE.update(_cwru_block(250, "O", "0.021", 48000.0))  # @3:00
_CWRU_TABLE.update(_cwru_block(262, "O", "0.021", 48000.0))  # @12:00


def _parse_cwru_stem(stem: str) -> StemInfo:
    if not re.fullmatch(r"\d+", stem):
        raise AdapterParseError(f"cwru: stem {stem!r} is not a numeric record id")
    rec_id = int(stem)
    if rec_id not in _CWRU_TABLE:
        raise AdapterParseError(f"cwru: record id {stem!r} not in the documented table")
    label, severity, load, rate = _CWRU_TABLE[rec_id]
    return StemInfo(
        label=HealthLabel(label),
        severity_value=severity,
        severity_unit="in" if severity else "",
        load_value=load,
        load_unit="hp",
        shaft_speed=_CWRU_RPM[int(load)],
        sampling_rate=rate,
        equipment="SKF 6205-2RS",
    )


_UORED_RE = re.compile(r"([HIOBC])-(\d+)-(\d+)")


def _parse_uored_stem(stem: str) -> StemInfo:
    match = _UORED_RE.fullmatch(stem)
    if match is None:
        raise AdapterParseError(f"uored_vafcls: stem {stem!r} does not match L-n-m")
    label = HealthLabel(match.group(1))
    code = f"{match.group(2)}-{match.group(3)}"
    return StemInfo(
        label=label,
        severity_value="" if label is HealthLabel.H else code,
        severity_unit="",
        load_value=None,
        load_unit="",
        shaft_speed=None,
        sampling_rate=42000.0,
        equipment="ER16K",
    )


_HUST_RE = re.compile(r"([A-Z]{1,2})([4-8])(0[024])")
_HUST_LABELS = {"N": "H", "H": "H", "I": "I", "O": "O", "B": "B"}


def _parse_hust_stem(stem: str) -> StemInfo:
    match = _HUST_RE.fullmatch(stem)
    if match is None:
        raise AdapterParseError(f"hust: stem {stem!r} does not match <fault><bearing><load>")
    letters, bearing, load_code = match.groups()
    if len(letters) == 2:
        # Two-letter codes (IB, IO, OB) are compound faults.
        if not set(letters) <= set("IOB"):
            raise AdapterParseError(f"hust: unknown fault code {letters!r} in {stem!r}")
        label = HealthLabel.X
    elif letters in _HUST_LABELS:
        label = HealthLabel(_HUST_LABELS[letters])
    else:
        raise AdapterParseError(f"hust: unknown fault code {letters!r} in {stem!r}")
    return StemInfo(
        label=label,
        severity_value="" if label is HealthLabel.H else stem,
        severity_unit="",
        load_value=float(load_code) * 100.0,
        load_unit="W",
        shaft_speed=None,
        sampling_rate=51200.0,
        equipment=f"620{bearing}",
    )


_PADERBORN_RE = re.compile(r"N(\d{2})_M(\d{2})_F(\d{2})_(K[A-Z0-9]\d{2})_(\d+)")


def _parse_paderborn_stem(stem: str) -> StemInfo:
    match = _PADERBORN_RE.fullmatch(stem)
    if match is None:
        raise AdapterParseError(
            f"paderborn: stem {stem!r} does not match Nxx_Mxx_Fxx_<bearing>_<trial>"
        )
    rpm_code, torque_code, _force_code, bearing, _trial = match.groups()
    if bearing.startswith("K0"):
        label = HealthLabel.H
    elif bearing.startswith("KI"):
        label = HealthLabel.I
    elif bearing.startswith("KA"):
        label = HealthLabel.O
    elif bearing.startswith("KB"):
        # KB bearings carry combined inner+outer damage.
        label = HealthLabel.X
    else:
        raise AdapterParseError(f"paderborn: unknown bearing code {bearing!r}")
    return StemInfo(
        label=label,
        severity_value="" if label is HealthLabel.H else bearing,
        severity_unit="",
        load_value=float(torque_code) / 10.0,
        load_unit="Nm",
        shaft_speed=float(rpm_code) * 100.0,
        sampling_rate=64000.0,
        equipment="6203",
    )


def builtin_adapters() -> dict[str, DatasetAdapter]:
    """Adapters for the four public datasets, keyed by dataset_id."""
    return {
        "cwru": DatasetAdapter(
            dataset_id="cwru",
            default_sampling_rates=(12000.0, 48000.0),
            channel_patterns=(
                ("*_DE_time", "DE"),
                ("*_FE_time", "FE"),
                ("*_BA_time", "BA"),
            ),
            parse_stem=_parse_cwru_stem,
        ),
        "uored_vafcls": DatasetAdapter(
            dataset_id="uored_vafcls",
            default_sampling_rates=(42000.0,),
            channel_patterns=(("*", "ACC"),),
            parse_stem=_parse_uored_stem,
        ),
        "hust": DatasetAdapter(
            dataset_id="hust",
            default_sampling_rates=(51200.0,),
            channel_patterns=(("*", "ACC"),),
            parse_stem=_parse_hust_stem,
        ),
        "paderborn": DatasetAdapter(
            dataset_id="paderborn",
            default_sampling_rates=(64000.0,),
            channel_patterns=(("*", "ACC"),),
            parse_stem=_parse_paderborn_stem,
        ),
    }


def with_sampling_rate(info: StemInfo, rate: float | None) -> StemInfo:
    """Apply a per-run sampling-rate override (sources disagree for some sets)."""
    if rate is None:
        return info
    return replace(info, sampling_rate=float(rate))
