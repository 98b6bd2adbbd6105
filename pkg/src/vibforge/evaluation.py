"""Imbalance-aware scoring: balanced accuracy, macro F1, K-fold aggregation.

Both metrics average per-class quantities over classes that actually occur
in the truth column, so a class with zero support never poisons a fold's
score. Aggregation across folds reports the arithmetic mean and the sample
standard deviation (denominator K-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baseline import read_predictions
from .folds import SplitManifest


class EvalError(Exception):
    pass


class UnknownLabel(EvalError):
    pass


class NoSupport(EvalError):
    pass


class MissingSegment(EvalError):
    pass


class DuplicateSegment(EvalError):
    pass


@dataclass(frozen=True)
class PredictionSet:
    rows: tuple[tuple[str, str, str], ...]  # (segment_id, true_label, predicted_label)
    class_set: tuple[str, ...]

    def __post_init__(self) -> None:
        known = set(self.class_set)
        seen: set[str] = set()
        for sid, truth, pred in self.rows:
            if sid in seen:
                raise DuplicateSegment(f"segment {sid} appears more than once")
            seen.add(sid)
            if truth not in known:
                raise UnknownLabel(f"{sid}: true label {truth!r} not in class set")
            if pred not in known:
                raise UnknownLabel(f"{sid}: predicted label {pred!r} not in class set")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) int64, row = truth, column = prediction
    class_set: tuple[str, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.class_set)
        if counts.shape != (c, c):
            raise EvalError(f"confusion matrix shape {counts.shape} for {c} classes")
        if np.any(counts < 0):
            raise EvalError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> dict[str, int]:
        sums = self.counts.sum(axis=1)
        return {c: int(sums[i]) for i, c in enumerate(self.class_set)}


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    balanced_accuracy: float
    macro_f1: float
    support: dict[str, int]


@dataclass(frozen=True)
class MetricsReport:
    per_fold: tuple[FoldMetrics, ...]
    mean_balanced_accuracy: float
    std_balanced_accuracy: float
    mean_macro_f1: float
    std_macro_f1: float


def confusion(preds: PredictionSet) -> ConfusionMatrix:
    if not preds.rows:
        raise EvalError("cannot score an empty prediction set")
    index = {c: i for i, c in enumerate(preds.class_set)}
    counts = np.zeros((len(preds.class_set), len(preds.class_set)), dtype=np.int64)
    for _, truth, pred in preds.rows:
        counts[index[truth], index[pred]] += 1
    return ConfusionMatrix(counts=counts, class_set=preds.class_set)


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes with support > 0."""
    row_sums = cm.counts.sum(axis=1)
    supported = np.nonzero(row_sums > 0)[0]
    if supported.size == 0:
        raise NoSupport("no class has support")
    recalls = cm.counts[supported, supported] / row_sums[supported]
    return float(recalls.mean())


def macro_f1(cm: ConfusionMatrix) -> float:
    """Mean per-class F1 over classes with support > 0; a class with
    precision + recall = 0 contributes 0."""
    row_sums = cm.counts.sum(axis=1)
    col_sums = cm.counts.sum(axis=0)
    supported = np.nonzero(row_sums > 0)[0]
    if supported.size == 0:
        raise NoSupport("no class has support")
    f1s = []
    for i in supported:
        tp = cm.counts[i, i]
        precision = tp / col_sums[i] if col_sums[i] > 0 else 0.0
        recall = tp / row_sums[i]
        f1s.append(0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall))
    return float(np.mean(f1s))


def score_fold(preds: PredictionSet, fold: int) -> FoldMetrics:
    cm = confusion(preds)
    return FoldMetrics(
        fold=fold,
        balanced_accuracy=balanced_accuracy(cm),
        macro_f1=macro_f1(cm),
        support=cm.support(),
    )


def aggregate(per_fold: Sequence[FoldMetrics]) -> MetricsReport:
    if len(per_fold) < 2:
        raise EvalError("aggregation needs metrics from >= 2 folds")
    ba = [m.balanced_accuracy for m in per_fold]
    f1 = [m.macro_f1 for m in per_fold]

    def sample_std(values: list[float]) -> float:
        mean = sum(values) / len(values)
        return math.sqrt(sum((v - mean) ** 2 for v in values) / (len(values) - 1))

    return MetricsReport(
        per_fold=tuple(per_fold),
        mean_balanced_accuracy=sum(ba) / len(ba),
        std_balanced_accuracy=sample_std(ba),
        mean_macro_f1=sum(f1) / len(f1),
        std_macro_f1=sample_std(f1),
    )


def load_predictions(
    path: str | Path,
    split: SplitManifest,
    truth_of: Mapping[str, str],
) -> PredictionSet:
    """Join a prediction CSV against the split's test rows. Every test
    segment must appear exactly once; rows for other segments are ignored.
    The class set is the union of the file's probability columns and the
    truth labels, in sorted order."""
    ids, labels, _, file_classes = read_predictions(path)
    predicted: dict[str, str] = {}
    test_set = set(split.test)
    for sid, lab in zip(ids, labels):
        if sid in predicted and sid in test_set:
            raise DuplicateSegment(f"{path}: segment {sid} predicted more than once")
        predicted[sid] = lab
    missing = [sid for sid in split.test if sid not in predicted]
    if missing:
        raise MissingSegment(f"{path}: no prediction for test segments {missing[:5]}")
    truth_missing = [sid for sid in split.test if sid not in truth_of]
    if truth_missing:
        raise MissingSegment(f"no true label known for {truth_missing[:5]}")
    class_set = tuple(
        sorted(set(file_classes) | {truth_of[sid] for sid in split.test})
    )
    rows = tuple((sid, truth_of[sid], predicted[sid]) for sid in split.test)
    return PredictionSet(rows=rows, class_set=class_set)


def render_report(blocks: Mapping[str, Mapping[str, MetricsReport]]) -> str:
    """Text table: one block per division, methods as rows, mean/std of both
    metrics as percentage columns to 2 decimals. The best mean per block and
    metric is wrapped in ** marks."""
    headers = ["Metric", "Method", "Mean BA (%)", "Mean F1 (%)", "Std BA (%)", "Std F1 (%)"]
    rows: list[list[str]] = []
    for block, methods in blocks.items():
        if not methods:
            continue
        best_ba = max(r.mean_balanced_accuracy for r in methods.values())
        best_f1 = max(r.mean_macro_f1 for r in methods.values())
        first = True
        for method, rep in methods.items():
            ba = f"{100 * rep.mean_balanced_accuracy:.2f}"
            f1 = f"{100 * rep.mean_macro_f1:.2f}"
            if rep.mean_balanced_accuracy == best_ba:
                ba = f"**{ba}**"
            if rep.mean_macro_f1 == best_f1:
                f1 = f"**{f1}**"
            rows.append(
                [
                    block if first else "",
                    method,
                    ba,
                    f1,
                    f"{100 * rep.std_balanced_accuracy:.2f}",
                    f"{100 * rep.std_macro_f1:.2f}",
                ]
            )
            first = False
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip()]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    lines.append("Std is the sample standard deviation (denominator K-1).")
    return "\n".join(lines) + "\n"


REPORT_CSV_HEADER = [
    "block",
    "method",
    "mean_balanced_accuracy",
    "mean_macro_f1",
    "std_balanced_accuracy",
    "std_macro_f1",
]


def write_report_csv(path: str | Path, blocks: Mapping[str, Mapping[str, MetricsReport]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(REPORT_CSV_HEADER)]
    for block, methods in blocks.items():
        for method, rep in methods.items():
            lines.append(
                ",".join(
                    [
                        block,
                        method,
                        repr(rep.mean_balanced_accuracy),
                        repr(rep.mean_macro_f1),
                        repr(rep.std_balanced_accuracy),
                        repr(rep.std_macro_f1),
                    ]
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
