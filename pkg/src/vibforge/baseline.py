"""Classical baseline: pooled log-spectrogram features and a softmax classifier.

The feature vector for one segment is a 16x32 mean-pooled view of its dB
spectrogram, flattened row-major to 512 values. Feature ranking uses the
one-way ANOVA F statistic per feature. The classifier is multinomial
logistic regression trained by minibatch gradient descent with L2 weight
decay (bias excluded), plateau-driven learning-rate reduction, and early
stopping on validation loss.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .folds import SplitManifest
from .spectro import to_db


class BaselineError(Exception):
    pass


class MatrixTooSmall(BaselineError):
    pass


class DegenerateClasses(BaselineError):
    pass


class DimensionMismatch(BaselineError):
    pass


class NonFiniteLoss(BaselineError):
    def __init__(self, epoch: int) -> None:
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch


class PredictionCsvError(BaselineError):
    pass


POOL_GRID = (16, 32)
FEATURE_COUNT = POOL_GRID[0] * POOL_GRID[1]


def default_feature_names(width: int = FEATURE_COUNT) -> tuple[str, ...]:
    return tuple(f"f{j:03d}" for j in range(width))


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # (n_segments, n_features) float64
    feature_names: tuple[str, ...]
    segment_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise BaselineError(f"feature matrix must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise BaselineError("feature matrix contains non-finite values")
        if len(self.segment_ids) != values.shape[0]:
            raise DimensionMismatch(
                f"{values.shape[0]} rows but {len(self.segment_ids)} segment ids"
            )
        if len(self.feature_names) != values.shape[1]:
            raise DimensionMismatch(
                f"{values.shape[1]} columns but {len(self.feature_names)} feature names"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "segment_ids", tuple(self.segment_ids))


def pool_spectrogram(
    magnitudes: np.ndarray, grid: tuple[int, int] = POOL_GRID, epsilon: float = 1e-10
) -> np.ndarray:
    """Mean-pool the dB view of a magnitude grid into grid cells, flattened
    row-major. Rows and columns are split into near-equal runs; when the
    size is not divisible the leading runs are one longer."""
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    if magnitudes.ndim != 2:
        raise MatrixTooSmall(f"expected a 2-D grid, got shape {magnitudes.shape}")
    rows, cols = grid
    if magnitudes.shape[0] < rows or magnitudes.shape[1] < cols:
        raise MatrixTooSmall(
            f"grid {magnitudes.shape} is smaller than the {rows}x{cols} pooling grid"
        )
    db = to_db(magnitudes, epsilon=epsilon)
    pooled = np.empty((rows, cols), dtype=np.float64)
    for i, band in enumerate(np.array_split(db, rows, axis=0)):
        for j, cell in enumerate(np.array_split(band, cols, axis=1)):
            pooled[i, j] = cell.mean()
    return pooled.reshape(-1)


@dataclass(frozen=True)
class SelectionReport:
    scores: np.ndarray  # per-feature F statistic, +inf where within-class SS is 0
    selected: tuple[int, ...]  # feature indices, best first, |selected| = min(k, n)
    k: int


def anova_f_scores(
    features: FeatureMatrix | np.ndarray,
    labels: Sequence[str],
    k: int | None = None,
) -> SelectionReport:
    """One-way ANOVA F per feature column. A feature whose within-class sum
    of squares is exactly 0 while class means differ scores +inf; one whose
    class means coincide scores 0. Ties rank by ascending feature index."""
    x = features.values if isinstance(features, FeatureMatrix) else features
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise BaselineError(f"features must be 2-D, got shape {x.shape}")
    labels = list(labels)
    if len(labels) != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} rows but {len(labels)} labels")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DegenerateClasses(f"need >= 2 classes, got {classes}")
    groups = [x[np.array([lab == c for lab in labels])] for c in classes]
    if any(len(g) < 2 for g in groups):
        raise DegenerateClasses("every class needs >= 2 samples")

    n = x.shape[0]
    grand = x.mean(axis=0)
    ss_between = np.zeros(x.shape[1])
    ss_within = np.zeros(x.shape[1])
    for g in groups:
        mean_g = g.mean(axis=0)
        ss_between += len(g) * (mean_g - grand) ** 2
        ss_within += ((g - mean_g) ** 2).sum(axis=0)
    ms_between = ss_between / (len(classes) - 1)
    ms_within = ss_within / (n - len(classes))
    scores = np.empty(x.shape[1], dtype=np.float64)
    for j in range(x.shape[1]):
        if ms_between[j] == 0.0:
            scores[j] = 0.0
        elif ss_within[j] == 0.0:
            scores[j] = math.inf
        else:
            scores[j] = ms_between[j] / ms_within[j]

    # stable sort on -score keeps ascending index order within ties
    order = np.argsort(-scores, kind="stable")
    if k is None:
        k = x.shape[1]
    if k < 1:
        raise ValueError("k must be >= 1")
    keep = min(k, x.shape[1])
    return SelectionReport(scores=scores, selected=tuple(int(i) for i in order[:keep]), k=k)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    max_epochs: int = 300
    batch_size: int = 32
    l2_lambda: float = 1e-4
    early_stop_patience: int = 25
    lr_reduce_factor: float = 0.5
    lr_reduce_patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, max_epochs, batch_size must be positive")
        if self.early_stop_patience < 1 or self.lr_reduce_patience < 1:
            raise ValueError("patience values must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if not 0 < self.lr_reduce_factor < 1:
            raise ValueError("lr_reduce_factor must be in (0, 1)")

    def config_hash(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    learning_rate: float


@dataclass(frozen=True)
class SoftmaxModel:
    weights: np.ndarray  # (n_classes, n_kept + 1), bias column last
    class_labels: tuple[str, ...]  # sorted ascending
    feature_means: np.ndarray  # kept features only, aligned with kept_indices
    feature_stds: np.ndarray  # kept features only, all > 0
    kept_indices: tuple[int, ...]  # positions in the full feature width
    input_width: int
    config_hash: str
    trace: tuple[EpochStats, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.feature_stds) <= 0.0):
            raise BaselineError("standardization stds must be > 0")


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _objective(
    weights: np.ndarray, x_bias: np.ndarray, y_onehot: np.ndarray, l2_lambda: float
) -> float:
    probs = _softmax(x_bias @ weights.T)
    eps = 1e-300
    ce = -np.mean(np.sum(y_onehot * np.log(probs + eps), axis=1))
    penalty = 0.5 * l2_lambda * float(np.sum(weights[:, :-1] ** 2))
    return float(ce + penalty)


def objective_gradient(
    weights: np.ndarray, x_bias: np.ndarray, y_onehot: np.ndarray, l2_lambda: float
) -> np.ndarray:
    """Analytic gradient of the training objective, exposed for validation."""
    n = x_bias.shape[0]
    probs = _softmax(x_bias @ weights.T)
    grad = (probs - y_onehot).T @ x_bias / n
    grad[:, :-1] += l2_lambda * weights[:, :-1]
    return grad


def train_softmax(
    features: FeatureMatrix,
    labels: Sequence[str],
    split: SplitManifest,
    config: TrainConfig = TrainConfig(),
) -> SoftmaxModel:
    """Fit by minibatch gradient descent from zero weights. Standardization
    statistics come from the training rows only; columns with zero training
    variance are dropped. Validation loss drives both the plateau learning
    rate schedule and early stopping (strict improvement resets the
    counters); the weights returned are the best-validation snapshot."""
    labels = list(labels)
    if len(labels) != features.values.shape[0]:
        raise DimensionMismatch(f"{features.values.shape[0]} rows but {len(labels)} labels")
    index_of = {sid: i for i, sid in enumerate(features.segment_ids)}
    missing = [sid for sid in list(split.train) + list(split.val) if sid not in index_of]
    if missing:
        raise BaselineError(f"split references unknown segments: {missing[:5]}")
    train_rows = np.array([index_of[sid] for sid in split.train], dtype=np.intp)
    val_rows = np.array([index_of[sid] for sid in split.val], dtype=np.intp)
    if train_rows.size == 0 or val_rows.size == 0:
        raise BaselineError("train and val splits must both be non-empty")

    classes = tuple(sorted({labels[i] for i in train_rows}))
    if len(classes) < 2:
        raise DegenerateClasses(f"training split holds classes {classes}")
    class_index = {c: i for i, c in enumerate(classes)}
    for i in val_rows:
        if labels[i] not in class_index:
            raise BaselineError(f"val label {labels[i]!r} unseen in training")

    x_train_full = features.values[train_rows]
    means_full = x_train_full.mean(axis=0)
    stds_full = x_train_full.std(axis=0)
    kept = tuple(int(j) for j in np.nonzero(stds_full > 0.0)[0])
    if not kept:
        raise BaselineError("every feature is constant on the training split")
    kept_arr = np.array(kept, dtype=np.intp)
    means = means_full[kept_arr]
    stds = stds_full[kept_arr]

    def prepare(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = (features.values[rows][:, kept_arr] - means) / stds
        x_bias = np.hstack([x, np.ones((x.shape[0], 1))])
        y = np.zeros((rows.size, len(classes)))
        for r, i in enumerate(rows):
            y[r, class_index[labels[i]]] = 1.0
        return x_bias, y

    x_train, y_train = prepare(train_rows)
    x_val, y_val = prepare(val_rows)

    rng = np.random.default_rng(config.seed)
    weights = np.zeros((len(classes), len(kept) + 1))
    lr = config.learning_rate
    best_weights = weights.copy()
    best_val = _objective(weights, x_val, y_val, config.l2_lambda)
    stall_stop = 0
    stall_lr = 0
    trace: list[EpochStats] = []

    n = x_train.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grad = objective_gradient(weights, x_train[batch], y_train[batch], config.l2_lambda)
            weights -= lr * grad

        train_loss = _objective(weights, x_train, y_train, config.l2_lambda)
        val_loss = _objective(weights, x_val, y_val, config.l2_lambda)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise NonFiniteLoss(epoch)
        trace.append(EpochStats(epoch, train_loss, val_loss, lr))

        if val_loss < best_val:
            best_val = val_loss
            best_weights = weights.copy()
            stall_stop = 0
            stall_lr = 0
        else:
            stall_stop += 1
            stall_lr += 1
            if stall_stop >= config.early_stop_patience:
                break
            if stall_lr >= config.lr_reduce_patience:
                lr *= config.lr_reduce_factor
                stall_lr = 0

    return SoftmaxModel(
        weights=best_weights,
        class_labels=classes,
        feature_means=means,
        feature_stds=stds,
        kept_indices=kept,
        input_width=features.values.shape[1],
        config_hash=config.config_hash(),
        trace=tuple(trace),
    )


def predict(model: SoftmaxModel, features: FeatureMatrix) -> tuple[list[str], np.ndarray]:
    """Predicted label and class probabilities per row. Each probability row
    sums to 1; argmax ties resolve to the lowest class index."""
    if features.values.shape[1] != model.input_width:
        raise DimensionMismatch(
            f"model expects {model.input_width} features, got {features.values.shape[1]}"
        )
    kept = np.array(model.kept_indices, dtype=np.intp)
    x = (features.values[:, kept] - model.feature_means) / model.feature_stds
    x_bias = np.hstack([x, np.ones((x.shape[0], 1))])
    probs = _softmax(x_bias @ model.weights.T)
    picks = np.argmax(probs, axis=1)  # np.argmax returns the first maximum
    labels = [model.class_labels[i] for i in picks]
    return labels, probs


def save_model(model: SoftmaxModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": "softmax-baseline-v1",
        "class_labels": list(model.class_labels),
        "weights": [[repr(v) for v in row] for row in model.weights.tolist()],
        "feature_means": [repr(v) for v in model.feature_means.tolist()],
        "feature_stds": [repr(v) for v in model.feature_stds.tolist()],
        "kept_indices": list(model.kept_indices),
        "input_width": model.input_width,
        "config_hash": model.config_hash,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SoftmaxModel:
    path = Path(path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("schema") != "softmax-baseline-v1":
        raise BaselineError(f"{path}: unknown model schema {payload.get('schema')!r}")
    return SoftmaxModel(
        weights=np.array([[float(v) for v in row] for row in payload["weights"]]),
        class_labels=tuple(payload["class_labels"]),
        feature_means=np.array([float(v) for v in payload["feature_means"]]),
        feature_stds=np.array([float(v) for v in payload["feature_stds"]]),
        kept_indices=tuple(int(i) for i in payload["kept_indices"]),
        input_width=int(payload["input_width"]),
        config_hash=payload["config_hash"],
    )


def write_predictions(
    path: str | Path,
    segment_ids: Sequence[str],
    labels: Sequence[str],
    probs: np.ndarray,
    class_labels: tuple[str, ...],
) -> None:
    """CSV `segment_id,predicted_label,p_<class>...` with probability columns
    in the model's class order and repr() float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not (len(segment_ids) == len(labels) == probs.shape[0]):
        raise DimensionMismatch("segment ids, labels, and probability rows disagree")
    if probs.shape[1] != len(class_labels):
        raise DimensionMismatch("probability columns do not match class labels")
    lines = ["segment_id,predicted_label," + ",".join(f"p_{c}" for c in class_labels)]
    for sid, lab, row in zip(segment_ids, labels, probs):
        lines.append(f"{sid},{lab}," + ",".join(repr(float(p)) for p in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_predictions(
    path: str | Path,
) -> tuple[list[str], list[str], np.ndarray, tuple[str, ...]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise PredictionCsvError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:2] != ["segment_id", "predicted_label"] or not header[2:]:
        raise PredictionCsvError(f"{path}: bad header {lines[0]!r}")
    bad = [col for col in header[2:] if not col.startswith("p_")]
    if bad:
        raise PredictionCsvError(f"{path}: probability columns must start with p_: {bad}")
    classes = tuple(col[2:] for col in header[2:])
    ids: list[str] = []
    labels: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2 + len(classes):
            raise PredictionCsvError(f"{path}:{lineno}: expected {2 + len(classes)} fields")
        ids.append(parts[0])
        labels.append(parts[1])
        try:
            rows.append([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise PredictionCsvError(f"{path}:{lineno}: {exc}") from exc
    return ids, labels, np.array(rows, dtype=np.float64), classes


FEATURES_HEADER_PREFIX = ["segment_id", "label"]


def write_features(path: str | Path, features: FeatureMatrix, labels: Sequence[str]) -> None:
    """CSV `segment_id,label,f000..` with one column per feature name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if len(labels) != features.values.shape[0]:
        raise DimensionMismatch("labels do not match feature rows")
    lines = [",".join(FEATURES_HEADER_PREFIX + list(features.feature_names))]
    for sid, lab, row in zip(features.segment_ids, labels, features.values):
        lines.append(f"{sid},{lab}," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_features(path: str | Path) -> tuple[FeatureMatrix, list[str]]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise BaselineError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:2] != FEATURES_HEADER_PREFIX or not header[2:]:
        raise BaselineError(f"{path}: bad features header")
    ids: list[str] = []
    labels: list[str] = []
    rows: list[list[float]] = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        ids.append(parts[0])
        labels.append(parts[1])
        rows.append([float(v) for v in parts[2:]])
    matrix = FeatureMatrix(
        values=np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 2),
        feature_names=tuple(header[2:]),
        segment_ids=tuple(ids),
    )
    return matrix, labels
