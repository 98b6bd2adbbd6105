"""Bias-aware K-fold plans and train/val/test splits.

Folds are defined on whole recordings (one sensor channel of one capture),
never on individual segments, so context from one physical measurement can
never straddle a fold boundary. Two division rules exist: by motor load and
by fault severity. Under the severity rule, healthy recordings carry no
severity and are distributed by their load instead, using the same
ascending-load mapping the load rule would produce.

Plan and split files are CSV with one leading comment line
`# rule=<ByLoad|BySeverity> round=<k> seed=<s>`; a plan is round-free, so it
writes round=0 seed=0 there.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

from .catalog import BENCHMARK_LABELS, Catalog, HealthLabel, RecordingMeta, catalog_hash
from .dsp import segment_count, segment_length_for


class FoldError(Exception):
    pass


class MissingLoad(FoldError):
    def __init__(self, recording_ids: list[str]) -> None:
        super().__init__(f"recordings lack a load value: {sorted(recording_ids)}")
        self.recording_ids = sorted(recording_ids)


class MissingSeverity(FoldError):
    def __init__(self, recording_ids: list[str]) -> None:
        super().__init__(f"recordings lack a numeric severity: {sorted(recording_ids)}")
        self.recording_ids = sorted(recording_ids)


class PlanError(FoldError):
    pass


class DegeneratePlan(PlanError):
    """Fewer than 2 grouping values: cross-validation is undefined."""


@dataclass(frozen=True)
class DivisionRule:
    kind: str  # "ByLoad" | "BySeverity"
    K: int


@dataclass(frozen=True)
class FoldPlan:
    rule: DivisionRule
    assignment: dict[str, int]  # segment_id -> fold index, 1-based
    provenance: str  # catalog hash

    def fold_segments(self, fold: int) -> list[str]:
        return sorted(
            (sid for sid, f in self.assignment.items() if f == fold), key=_segment_sort_key
        )


@dataclass(frozen=True)
class SplitManifest:
    round: int
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    val_fraction: float
    rule_kind: str
    seed: int


def _segment_sort_key(segment_id: str) -> tuple[str, int]:
    recording, _, index = segment_id.rpartition("#")
    return recording, int(index)


def recording_of_segment(segment_id: str) -> str:
    return segment_id.rpartition("#")[0]


def benchmark_recordings(catalog: Catalog) -> list[RecordingMeta]:
    return [rec for rec in catalog.recordings if rec.label in BENCHMARK_LABELS]


def segment_ids_of(rec: RecordingMeta, segment_duration: float = 0.25) -> list[str]:
    """Segment ids the dsp segmentation of this recording will produce."""
    n_samples = int(round(rec.duration * rec.sampling_rate))
    length = segment_length_for(rec.sampling_rate, segment_duration)
    return [f"{rec.recording_id}#{i}" for i in range(segment_count(n_samples, length))]


def _load_fold_map(bench: list[RecordingMeta]) -> dict[float, int]:
    missing = [rec.recording_id for rec in bench if rec.load_value is None]
    if missing:
        raise MissingLoad(missing)
    units = {rec.load_unit for rec in bench}
    if len(units) > 1:
        raise PlanError(f"mixed load units {sorted(units)}: ascending order is undefined")
    loads = sorted({rec.load_value for rec in bench})
    return {load: i + 1 for i, load in enumerate(loads)}


def _build_plan(
    catalog: Catalog,
    rule: DivisionRule,
    fold_of_recording: dict[str, int],
    segment_duration: float,
) -> FoldPlan:
    assignment: dict[str, int] = {}
    for rec in benchmark_recordings(catalog):
        fold = fold_of_recording[rec.recording_id]
        for sid in segment_ids_of(rec, segment_duration):
            assignment[sid] = fold
    return FoldPlan(rule=rule, assignment=assignment, provenance=catalog_hash(catalog))


def plan_by_load(catalog: Catalog, segment_duration: float = 0.25) -> FoldPlan:
    """Ascending loads map to folds 1..K; segments labeled C or X stay out."""
    bench = benchmark_recordings(catalog)
    fold_of_load = _load_fold_map(bench)
    if len(fold_of_load) < 2:
        raise DegeneratePlan(f"only {len(fold_of_load)} distinct load value(s)")
    fold_of_recording = {rec.recording_id: fold_of_load[rec.load_value] for rec in bench}
    rule = DivisionRule(kind="ByLoad", K=len(fold_of_load))
    return _build_plan(catalog, rule, fold_of_recording, segment_duration)


def plan_by_severity(catalog: Catalog, segment_duration: float = 0.25) -> FoldPlan:
    """Ascending numeric severities map to folds 1..K; healthy goes by load."""
    bench = benchmark_recordings(catalog)
    faulty = [rec for rec in bench if rec.label is not HealthLabel.H]
    missing = [rec.recording_id for rec in faulty if rec.numeric_severity() is None]
    if missing:
        raise MissingSeverity(missing)
    severities = sorted({rec.numeric_severity() for rec in faulty})
    if len(severities) < 2:
        raise DegeneratePlan(f"only {len(severities)} distinct severity value(s)")
    fold_of_severity = {sev: i + 1 for i, sev in enumerate(severities)}
    fold_of_load = _load_fold_map(bench)

    k = len(severities)
    fold_of_recording: dict[str, int] = {}
    for rec in bench:
        if rec.label is HealthLabel.H:
            fold = fold_of_load[rec.load_value]
            if fold > k:
                raise PlanError(
                    f"{rec.recording_id}: healthy load rank {fold} exceeds the "
                    f"{k} severity folds"
                )
        else:
            fold = fold_of_severity[rec.numeric_severity()]
        fold_of_recording[rec.recording_id] = fold
    rule = DivisionRule(kind="BySeverity", K=k)
    return _build_plan(catalog, rule, fold_of_recording, segment_duration)


def make_splits(
    plan: FoldPlan, round: int, val_fraction: float = 0.2, seed: int = 0
) -> SplitManifest:
    """Round's fold is the test set; whole recordings fill val until it holds
    at least val_fraction of the remaining segments; the rest train."""
    k = plan.rule.K
    if k < 2:
        raise PlanError("cross-validation needs K >= 2")
    if not 1 <= round <= k:
        raise ValueError(f"round must be in 1..{k}")
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")

    by_recording: dict[str, list[str]] = {}
    test: list[str] = []
    for sid, fold in plan.assignment.items():
        if fold == round:
            test.append(sid)
        else:
            by_recording.setdefault(recording_of_segment(sid), []).append(sid)

    remaining_total = sum(len(v) for v in by_recording.values())
    target = val_fraction * remaining_total
    order = sorted(by_recording)
    random.Random(seed).shuffle(order)

    val: list[str] = []
    val_count = 0
    cursor = 0
    while val_count < target and cursor < len(order):
        segs = by_recording[order[cursor]]
        val.extend(segs)
        val_count += len(segs)
        cursor += 1
    train = [sid for rec in order[cursor:] for sid in by_recording[rec]]

    return SplitManifest(
        round=round,
        train=tuple(sorted(train, key=_segment_sort_key)),
        val=tuple(sorted(val, key=_segment_sort_key)),
        test=tuple(sorted(test, key=_segment_sort_key)),
        val_fraction=val_fraction,
        rule_kind=plan.rule.kind,
        seed=seed,
    )


def save_fold_plan(plan: FoldPlan, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# rule={plan.rule.kind} round=0 seed=0\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id", "fold"])
        for sid in sorted(plan.assignment, key=_segment_sort_key):
            writer.writerow([sid, plan.assignment[sid]])


def load_fold_plan(path: str | Path) -> FoldPlan:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# rule="):
            raise FoldError(f"{path}: missing rule comment line")
        kind = first.split()[1].split("=", 1)[1]
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["segment_id", "fold"]:
            raise FoldError(f"{path}: bad fold plan header {header}")
        assignment = {row[0]: int(row[1]) for row in reader if row}
    if not assignment:
        raise FoldError(f"{path}: empty fold plan")
    return FoldPlan(
        rule=DivisionRule(kind=kind, K=max(assignment.values())),
        assignment=assignment,
        provenance="",
    )


def save_split(split: SplitManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = (
        [(sid, "train") for sid in split.train]
        + [(sid, "val") for sid in split.val]
        + [(sid, "test") for sid in split.test]
    )
    rows.sort(key=lambda item: _segment_sort_key(item[0]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# rule={split.rule_kind} round={split.round} seed={split.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["segment_id", "role"])
        writer.writerows(rows)


def load_split(path: str | Path) -> SplitManifest:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# rule="):
            raise FoldError(f"{path}: missing rule comment line")
        parts = dict(item.split("=", 1) for item in first[2:].split())
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["segment_id", "role"]:
            raise FoldError(f"{path}: bad split header {header}")
        buckets: dict[str, list[str]] = {"train": [], "val": [], "test": []}
        for row in reader:
            if not row:
                continue
            sid, role = row
            if role not in buckets:
                raise FoldError(f"{path}: unknown role {role!r} for {sid}")
            buckets[role].append(sid)
    return SplitManifest(
        round=int(parts.get("round", "0")),
        train=tuple(buckets["train"]),
        val=tuple(buckets["val"]),
        test=tuple(buckets["test"]),
        val_fraction=0.0,
        rule_kind=parts.get("rule", ""),
        seed=int(parts.get("seed", "0")),
    )
