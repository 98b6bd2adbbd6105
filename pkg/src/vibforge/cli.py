"""Command-line pipeline driver.

Subcommands chain the library stages into reproducible experiments: catalog
ingestion, segmentation, spectrogram rendering, fold planning, splits,
features, selection, baseline training, prediction, scoring, and synthetic
fixtures. Every run drops a run-record JSON (tool version, config hash,
input hashes, seed) into the output directory.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 unexpected internal error. Errors print one line to stderr shaped
`ErrorClassName: message`.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .baseline import (
    BaselineError,
    FeatureMatrix,
    anova_f_scores,
    load_model,
    pool_spectrogram,
    predict,
    read_features,
    save_model,
    train_softmax,
    write_features,
    write_predictions,
)
from .catalog import (
    BUILTIN_DATASETS,
    Catalog,
    CatalogError,
    RecordingMeta,
    builtin_adapters,
    load_catalog,
    save_catalog,
)
from .config import ConfigError, ExperimentConfig, load_config
from .dsp import DspError, Segment, TimeSeries, fourier_spectrum, segment, stft
from .evaluation import (
    EvalError,
    MetricsReport,
    aggregate,
    load_predictions,
    render_report,
    score_fold,
    write_report_csv,
)
from .folds import (
    FoldError,
    FoldPlan,
    load_fold_plan,
    load_split,
    make_splits,
    plan_by_load,
    plan_by_severity,
    save_fold_plan,
    save_split,
    segment_ids_of,
)
from .matio import (
    MatchAmbiguous,
    MatFormatError,
    NoMatch,
    SignalCsvError,
    extract_channel,
    parse_mat_file,
    read_signal_csv,
)
from .spectro import (
    ImageRecord,
    SpectroError,
    check_manifest_image,
    encode_png,
    image_pipeline,
    pad_band,
    write_images_manifest,
)
from .synth import SynthError, benchmark_fixture

_DATA_ERRORS = (
    CatalogError,
    ConfigError,
    DspError,
    MatFormatError,
    NoMatch,
    MatchAmbiguous,
    SignalCsvError,
    SpectroError,
    FoldError,
    BaselineError,
    EvalError,
    SynthError,
    FileNotFoundError,
    ValueError,
)

SEGMENTS_HEADER = [
    "segment_id",
    "recording_id",
    "dataset_id",
    "label",
    "sampling_rate_hz",
    "segment_samples",
]

_RULE_OF_FLAG = {"by-load": "ByLoad", "by-severity": "BySeverity"}


# --- shared plumbing ---------------------------------------------------------

def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_run_record(
    out_dir: Path,
    subcommand: str,
    config: ExperimentConfig,
    inputs: Iterable[str | Path],
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for item in inputs:
        p = Path(item)
        if p.is_file():
            hashes[str(p)] = _sha256_file(p)
    record = {
        "tool": "vibforge",
        "version": __version__,
        "subcommand": subcommand,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "inputs": hashes,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    name = f"run_{subcommand.replace('-', '_')}.json"
    (out_dir / name).write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict = {}
    if getattr(args, "catalog", None):
        overrides["catalog"] = args.catalog
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    rule = getattr(args, "rule", None)
    if rule:
        overrides["rule"] = _RULE_OF_FLAG[rule]
    if getattr(args, "val_fraction", None) is not None:
        overrides["val_fraction"] = args.val_fraction
    if getattr(args, "segment_duration", None) is not None:
        overrides["segment_duration"] = args.segment_duration
    train: dict = {}
    for key in ("learning_rate", "max_epochs", "batch_size", "l2_lambda"):
        value = getattr(args, key, None)
        if value is not None:
            train[key] = value
    if train:
        overrides["train"] = train
    return load_config(getattr(args, "config", None), overrides)


def _resolve_source(catalog_path: Path, source: str) -> Path:
    candidates = [catalog_path.parent / source]
    data_dir = os.environ.get("VIBFORGE_DATA_DIR")
    if data_dir:
        candidates.append(Path(data_dir) / source)
    candidates.append(Path(source))
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    tried = ", ".join(str(c) for c in candidates)
    raise FileNotFoundError(f"signal file {source!r} not found; tried {tried}")


def _load_series(rec: RecordingMeta, catalog_path: Path) -> TimeSeries:
    path = _resolve_source(catalog_path, rec.source_file)
    if path.suffix.lower() == ".mat":
        mat = parse_mat_file(path)
        return extract_channel(mat, rec.channel_pattern or "*", rec.sampling_rate)
    return read_signal_csv(path, rec.sampling_rate)


def _segments_of(
    rec: RecordingMeta, catalog_path: Path, duration: float
) -> list[Segment]:
    series = _load_series(rec, catalog_path)
    return segment(series, duration, recording_id=rec.recording_id, label=rec.label)


def _map_recordings(
    recordings: Sequence[RecordingMeta],
    worker: Callable[[RecordingMeta], list],
    workers: int,
) -> list[list]:
    """Apply worker per recording; results come back in catalog order."""
    if workers <= 1:
        return [worker(rec) for rec in recordings]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(worker, rec) for rec in recordings]
        return [f.result() for f in futures]


def _compute_features(
    catalog: Catalog, catalog_path: Path, config: ExperimentConfig, workers: int
) -> tuple[FeatureMatrix, list[str]]:
    def worker(rec: RecordingMeta) -> list[tuple[str, str, np.ndarray]]:
        params = config.stft_for(rec.dataset_id)
        rows = []
        for seg in _segments_of(rec, catalog_path, config.segment_duration):
            padded = pad_band(stft(seg, params))
            rows.append((seg.segment_id, rec.label.value, pool_spectrogram(padded.values)))
        return rows

    ids: list[str] = []
    labels: list[str] = []
    vectors: list[np.ndarray] = []
    for rows in _map_recordings(catalog.recordings, worker, workers):
        for sid, label, vec in rows:
            ids.append(sid)
            labels.append(label)
            vectors.append(vec)
    if not vectors:
        raise BaselineError("catalog produced no segments")
    width = vectors[0].size
    matrix = FeatureMatrix(
        values=np.vstack(vectors),
        feature_names=tuple(f"f{j:03d}" for j in range(width)),
        segment_ids=tuple(ids),
    )
    return matrix, labels


def _write_segments_manifest(
    catalog: Catalog, path: Path, duration: float
) -> None:
    lines = [",".join(SEGMENTS_HEADER)]
    for rec in catalog.recordings:
        length = int(round(duration * rec.sampling_rate))
        for sid in segment_ids_of(rec, duration):
            lines.append(
                ",".join(
                    [
                        sid,
                        rec.recording_id,
                        rec.dataset_id,
                        rec.label.value,
                        repr(rec.sampling_rate),
                        str(length),
                    ]
                )
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_segments_truth(path: str | Path) -> dict[str, str]:
    """segment_id -> label from a segments manifest."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split(",") != SEGMENTS_HEADER:
        raise EvalError(f"{path}: bad segments manifest header")
    truth: dict[str, str] = {}
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        truth[parts[0]] = parts[3]
    return truth


def _plan_for(catalog: Catalog, config: ExperimentConfig) -> FoldPlan:
    if config.rule == "ByLoad":
        return plan_by_load(catalog, config.segment_duration)
    return plan_by_severity(catalog, config.segment_duration)


def _subset_columns(matrix: FeatureMatrix, columns: Sequence[int]) -> FeatureMatrix:
    cols = list(columns)
    return FeatureMatrix(
        values=matrix.values[:, cols],
        feature_names=tuple(matrix.feature_names[c] for c in cols),
        segment_ids=matrix.segment_ids,
    )


def _subset_rows(
    matrix: FeatureMatrix, labels: Sequence[str], ids: Sequence[str]
) -> tuple[FeatureMatrix, list[str]]:
    index_of = {sid: i for i, sid in enumerate(matrix.segment_ids)}
    missing = [sid for sid in ids if sid not in index_of]
    if missing:
        raise BaselineError(f"features file lacks segments: {missing[:5]}")
    rows = [index_of[sid] for sid in ids]
    sub = FeatureMatrix(
        values=matrix.values[rows],
        feature_names=matrix.feature_names,
        segment_ids=tuple(ids),
    )
    return sub, [labels[i] for i in rows]


# --- subcommands -------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    adapter = builtin_adapters()[args.dataset]
    root = Path(args.root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")
    files = sorted(
        p for p in root.rglob("*") if p.suffix.lower() in (".mat", ".csv")
    )
    recordings: list[RecordingMeta] = []
    sources: list[Path] = []
    for path in files:
        try:
            info = adapter.parse_stem(path.stem)
        except CatalogError as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
            continue
        rate = args.sampling_rate or info.sampling_rate
        rel = path.relative_to(root).as_posix()
        matched = False
        if path.suffix.lower() == ".mat":
            mat = parse_mat_file(path)
            for pattern, sensor in adapter.channel_patterns:
                try:
                    series = extract_channel(mat, pattern, rate)
                except NoMatch:
                    continue
                matched = True
                recordings.append(
                    _meta_from_stem(args.dataset, path.stem, info, sensor, pattern, rel, series)
                )
        else:
            series = read_signal_csv(path, rate)
            sensor = adapter.channel_patterns[0][1]
            matched = True
            recordings.append(
                _meta_from_stem(args.dataset, path.stem, info, sensor, "", rel, series)
            )
        if matched:
            sources.append(path)
        else:
            print(f"skipping {path.name}: no channel matched", file=sys.stderr)
    if not recordings:
        raise CatalogError(f"no recognizable recordings under {root}")
    catalog = Catalog(datasets=dict(BUILTIN_DATASETS), recordings=tuple(recordings))
    out_catalog = Path(args.out_catalog or Path(config.output_dir) / "catalog.csv")
    save_catalog(catalog, out_catalog)
    _write_run_record(out_catalog.parent, "ingest", config, sources)
    print(f"cataloged {len(recordings)} recordings from {len(sources)} files")
    return 0


def _meta_from_stem(dataset_id, stem, info, sensor, pattern, rel, series) -> RecordingMeta:
    return RecordingMeta(
        recording_id=f"{dataset_id}_{stem}_{sensor}",
        dataset_id=dataset_id,
        equipment=info.equipment,
        sampling_rate=series.sampling_rate,
        duration=series.duration,
        shaft_speed=info.shaft_speed,
        load_value=info.load_value,
        load_unit=info.load_unit,
        sensor_position=sensor,
        label=info.label,
        severity_value=info.severity_value,
        severity_unit=info.severity_unit,
        source_file=rel,
        channel_pattern=pattern,
    )


def cmd_segment(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    out_dir = Path(config.output_dir)
    _write_segments_manifest(catalog, out_dir / "segments.csv", config.segment_duration)
    _write_run_record(out_dir, "segment", config, [catalog_path])
    total = sum(len(segment_ids_of(rec, config.segment_duration)) for rec in catalog.recordings)
    print(f"enumerated {total} segments from {len(catalog.recordings)} recordings")
    return 0


def cmd_spectrogram(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    out_dir = Path(config.output_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    fold_of: dict[str, int] = {}
    if args.plan:
        fold_of = load_fold_plan(args.plan).assignment

    def worker(rec: RecordingMeta) -> list[ImageRecord]:
        params = config.stft_for(rec.dataset_id)
        records = []
        for seg in _segments_of(rec, catalog_path, config.segment_duration):
            image = image_pipeline(stft(seg, params), config.render)
            check_manifest_image(image, config.render)
            png_name = f"{seg.segment_id}.png"
            (images_dir / png_name).write_bytes(encode_png(image))
            records.append(
                ImageRecord(
                    segment_id=seg.segment_id,
                    png_path=f"images/{png_name}",
                    label=rec.label.value,
                    dataset_id=rec.dataset_id,
                    fold=str(fold_of.get(seg.segment_id, "")),
                )
            )
        return records

    all_records: list[ImageRecord] = []
    for records in _map_recordings(catalog.recordings, worker, args.workers):
        all_records.extend(records)
    write_images_manifest(all_records, out_dir / "images.csv")
    inputs = [catalog_path] + ([Path(args.plan)] if args.plan else [])
    _write_run_record(out_dir, "spectrogram", config, inputs)
    print(f"rendered {len(all_records)} images into {images_dir}")
    return 0


def cmd_folds(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    plan = _plan_for(catalog, config)
    out_plan = Path(args.out_plan or Path(config.output_dir) / "plan.csv")
    save_fold_plan(plan, out_plan)
    _write_run_record(out_plan.parent, "folds", config, [catalog_path])
    print(f"{plan.rule.kind} plan with K={plan.rule.K} over {len(plan.assignment)} segments")
    return 0


def cmd_splits(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    plan = load_fold_plan(args.plan)
    split = make_splits(plan, args.round, config.val_fraction, config.seed)
    out_split = Path(args.out_split or Path(config.output_dir) / f"split_r{args.round}.csv")
    save_split(split, out_split)
    _write_run_record(out_split.parent, "splits", config, [args.plan])
    print(
        f"round {args.round}: train={len(split.train)} val={len(split.val)} "
        f"test={len(split.test)}"
    )
    return 0


def cmd_features(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    matrix, labels = _compute_features(catalog, catalog_path, config, args.workers)
    out_features = Path(args.out_features or Path(config.output_dir) / "features.csv")
    write_features(out_features, matrix, labels)
    _write_run_record(out_features.parent, "features", config, [catalog_path])
    print(f"wrote {matrix.values.shape[0]} x {matrix.values.shape[1]} features")
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    matrix, labels = read_features(args.features)
    if args.split:
        split = load_split(args.split)
        matrix, labels = _subset_rows(matrix, labels, split.train)
    report = anova_f_scores(matrix, labels, k=args.top_k)
    out_selection = Path(args.out_selection or Path(config.output_dir) / "selection.json")
    out_selection.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "k": report.k,
        "selected": list(report.selected),
        "scores": [repr(float(s)) for s in report.scores],
    }
    out_selection.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    inputs = [args.features] + ([args.split] if args.split else [])
    _write_run_record(out_selection.parent, "select", config, inputs)
    print(f"top {len(report.selected)} of {report.scores.size} features selected")
    return 0


def cmd_train_baseline(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.features:
        matrix, labels = read_features(args.features)
    else:
        matrix, labels = _compute_features(catalog, catalog_path, config, args.workers)
        write_features(out_dir / "features.csv", matrix, labels)
    _write_segments_manifest(catalog, out_dir / "segments.csv", config.segment_duration)

    plan = _plan_for(catalog, config)
    save_fold_plan(plan, out_dir / "plan.csv")
    rounds = [args.round] if args.round else list(range(1, plan.rule.K + 1))

    for r in rounds:
        split = make_splits(plan, r, config.val_fraction, config.seed)
        save_split(split, out_dir / f"split_r{r}.csv")
        feats_r, labels_r = matrix, labels
        if args.top_k:
            train_matrix, train_labels = _subset_rows(matrix, labels, split.train)
            selection = anova_f_scores(train_matrix, train_labels, k=args.top_k)
            feats_r = _subset_columns(matrix, selection.selected)
            (out_dir / f"selection_r{r}.json").write_text(
                json.dumps({"k": selection.k, "selected": list(selection.selected)}, indent=2)
                + "\n",
                encoding="utf-8",
            )
        train_cfg = replace(config.train, seed=config.train.seed + r)
        model = train_softmax(feats_r, labels_r, split, train_cfg)
        save_model(model, out_dir / f"model_r{r}.json")
        test_matrix, _ = _subset_rows(feats_r, labels_r, split.test)
        predicted, probs = predict(model, test_matrix)
        write_predictions(
            out_dir / f"predictions_r{r}.csv",
            split.test,
            predicted,
            probs,
            model.class_labels,
        )
        print(
            f"round {r}: trained on {len(split.train)} segments, "
            f"predicted {len(split.test)}, best val loss "
            f"{min(e.val_loss for e in model.trace):.4f}"
        )

    inputs = [catalog_path] + ([Path(args.features)] if args.features else [])
    _write_run_record(out_dir, "train-baseline", config, inputs)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    model = load_model(args.model)
    matrix, labels = read_features(args.features)
    if args.selection:
        selected = json.loads(Path(args.selection).read_text(encoding="utf-8"))["selected"]
        matrix = _subset_columns(matrix, [int(i) for i in selected])
    if args.split:
        split = load_split(args.split)
        matrix, labels = _subset_rows(matrix, labels, split.test)
    predicted, probs = predict(model, matrix)
    out_predictions = Path(
        args.out_predictions or Path(config.output_dir) / "predictions.csv"
    )
    write_predictions(
        out_predictions, matrix.segment_ids, predicted, probs, model.class_labels
    )
    inputs = [args.model, args.features]
    inputs += [args.split] if args.split else []
    inputs += [args.selection] if args.selection else []
    _write_run_record(out_predictions.parent, "predict", config, inputs)
    print(f"predicted {len(predicted)} segments")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    run_dir = Path(args.dir or config.output_dir)
    truth = read_segments_truth(run_dir / "segments.csv")
    pred_files = sorted(run_dir.glob("predictions_r*.csv"))
    if not pred_files:
        raise EvalError(f"no predictions_r*.csv under {run_dir}")
    per_fold = []
    rule_kind = ""
    inputs: list[Path] = [run_dir / "segments.csv"]
    for pred_path in pred_files:
        r = int(pred_path.stem.split("_r")[-1])
        split_path = run_dir / f"split_r{r}.csv"
        if not split_path.is_file():
            raise EvalError(f"missing {split_path} for {pred_path.name}")
        split = load_split(split_path)
        rule_kind = split.rule_kind or rule_kind
        per_fold.append(score_fold(load_predictions(pred_path, split, truth), r))
        inputs += [pred_path, split_path]
    report = aggregate(per_fold)
    blocks = {rule_kind or "results": {args.method: report}}
    write_report_csv(run_dir / "metrics.csv", blocks)
    (run_dir / "metrics.txt").write_text(render_report(blocks), encoding="utf-8")
    fold_lines = ["round,balanced_accuracy,macro_f1"]
    for fm in per_fold:
        fold_lines.append(f"{fm.fold},{repr(fm.balanced_accuracy)},{repr(fm.macro_f1)}")
    (run_dir / "metrics_folds.csv").write_text("\n".join(fold_lines) + "\n", encoding="utf-8")
    _write_run_record(run_dir, "evaluate", config, inputs)
    print(
        f"balanced accuracy {report.mean_balanced_accuracy:.4f} "
        f"+/- {report.std_balanced_accuracy:.4f}, macro F1 "
        f"{report.mean_macro_f1:.4f} +/- {report.std_macro_f1:.4f} "
        f"over {len(per_fold)} folds"
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    import csv as _csv

    config = _experiment_config(args)
    blocks: dict[str, dict[str, MetricsReport]] = {}
    for metrics_path in args.metrics:
        with open(metrics_path, newline="", encoding="utf-8") as fh:
            reader = _csv.DictReader(fh)
            for row in reader:
                block = blocks.setdefault(row["block"], {})
                block[row["method"]] = MetricsReport(
                    per_fold=(),
                    mean_balanced_accuracy=float(row["mean_balanced_accuracy"]),
                    std_balanced_accuracy=float(row["std_balanced_accuracy"]),
                    mean_macro_f1=float(row["mean_macro_f1"]),
                    std_macro_f1=float(row["std_macro_f1"]),
                )
    if not blocks:
        raise EvalError("metrics files contained no rows")
    out_report = Path(args.out_report or Path(config.output_dir) / "report.txt")
    out_report.parent.mkdir(parents=True, exist_ok=True)
    out_report.write_text(render_report(blocks), encoding="utf-8")
    _write_run_record(out_report.parent, "report", config, args.metrics)
    print(f"report over {sum(len(b) for b in blocks.values())} result rows")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    out_dir = Path(config.output_dir)
    catalog = benchmark_fixture(args.preset, out_dir)
    _write_run_record(out_dir, "synth", config, [])
    print(f"preset {args.preset!r}: {len(catalog.recordings)} recordings in {out_dir}")
    return 0


def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    catalog_path = Path(config.catalog)
    catalog = load_catalog(catalog_path)
    matches = [rec for rec in catalog.recordings if rec.recording_id == args.recording]
    if not matches:
        raise CatalogError(f"unknown recording_id {args.recording!r}")
    series = _load_series(matches[0], catalog_path)
    hop = args.hop or args.frame // 2
    spectrum = fourier_spectrum(series, args.frame, hop)
    out_spectrum = Path(args.out_spectrum or Path(config.output_dir) / "spectrum.csv")
    out_spectrum.parent.mkdir(parents=True, exist_ok=True)
    lines = ["freq_hz,amplitude"]
    for f, a in zip(spectrum.freq_axis, spectrum.magnitude):
        lines.append(f"{repr(float(f))},{repr(float(a))}")
    out_spectrum.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_run_record(out_spectrum.parent, "spectrum", config, [catalog_path])
    print(f"averaged spectrum with {spectrum.magnitude.size} bins")
    return 0


# --- parser ------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser, *, catalog: bool = False) -> None:
    sp.add_argument("--config", help="JSON experiment config file")
    sp.add_argument("--out", help="output directory (default: config output_dir)")
    sp.add_argument("--seed", type=int, help="root random seed")
    if catalog:
        sp.add_argument("--catalog", help="catalog manifest CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibforge",
        description="Bearing-vibration spectrogram benchmark pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    sp = sub.add_parser("ingest", help="build a catalog from a dataset file tree")
    _add_common(sp)
    sp.add_argument("--dataset", required=True, choices=sorted(builtin_adapters()))
    sp.add_argument("--root", required=True, help="dataset root directory")
    sp.add_argument("--sampling-rate", type=float, help="override the adapter's rate")
    sp.add_argument("--out-catalog", help="catalog CSV path")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("segment", help="enumerate fixed-duration segments")
    _add_common(sp, catalog=True)
    sp.add_argument("--segment-duration", type=float)
    sp.set_defaults(func=cmd_segment)

    sp = sub.add_parser("spectrogram", help="render per-segment spectrogram PNGs")
    _add_common(sp, catalog=True)
    sp.add_argument("--segment-duration", type=float)
    sp.add_argument("--plan", help="fold plan CSV; fills the manifest fold column")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_spectrogram)

    sp = sub.add_parser("folds", help="build a bias-aware K-fold plan")
    _add_common(sp, catalog=True)
    sp.add_argument("--rule", choices=sorted(_RULE_OF_FLAG), required=True)
    sp.add_argument("--segment-duration", type=float)
    sp.add_argument("--out-plan", help="plan CSV path")
    sp.set_defaults(func=cmd_folds)

    sp = sub.add_parser("splits", help="derive train/val/test from a fold plan")
    _add_common(sp)
    sp.add_argument("--plan", required=True, help="fold plan CSV")
    sp.add_argument("--round", type=int, required=True)
    sp.add_argument("--val-fraction", type=float)
    sp.add_argument("--out-split", help="split CSV path")
    sp.set_defaults(func=cmd_splits)

    sp = sub.add_parser("features", help="pooled spectrogram feature table")
    _add_common(sp, catalog=True)
    sp.add_argument("--segment-duration", type=float)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-features", help="features CSV path")
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("select", help="rank features by ANOVA F score")
    _add_common(sp)
    sp.add_argument("--features", required=True, help="features CSV")
    sp.add_argument("--top-k", type=int)
    sp.add_argument("--split", help="restrict scoring to this split's train rows")
    sp.add_argument("--out-selection", help="selection JSON path")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("train-baseline", help="train the softmax baseline per round")
    _add_common(sp, catalog=True)
    sp.add_argument("--rule", choices=sorted(_RULE_OF_FLAG))
    sp.add_argument("--round", type=int, help="single round (default: all rounds)")
    sp.add_argument("--val-fraction", type=float)
    sp.add_argument("--segment-duration", type=float)
    sp.add_argument("--features", help="precomputed features CSV")
    sp.add_argument("--top-k", type=int, help="ANOVA selection on the train split")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--max-epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--l2-lambda", type=float)
    sp.set_defaults(func=cmd_train_baseline)

    sp = sub.add_parser("predict", help="apply a saved model to a feature table")
    _add_common(sp)
    sp.add_argument("--model", required=True, help="model JSON")
    sp.add_argument("--features", required=True, help="features CSV")
    sp.add_argument("--split", help="restrict to this split's test rows")
    sp.add_argument("--selection", help="selection JSON from train or select")
    sp.add_argument("--out-predictions", help="prediction CSV path")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="score predictions against the truth")
    _add_common(sp)
    sp.add_argument("--dir", help="run directory with predictions/splits/segments")
    sp.add_argument("--method", default="SoftmaxBaseline", help="method name in the report")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("report", help="merge metrics CSVs into one table")
    _add_common(sp)
    sp.add_argument("--metrics", nargs="+", required=True, help="metrics CSV files")
    sp.add_argument("--out-report", help="report text path")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("synth", help="write a synthetic benchmark fixture")
    _add_common(sp)
    sp.add_argument("--preset", default="mini")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("spectrum", help="averaged Fourier spectrum of a recording")
    _add_common(sp, catalog=True)
    sp.add_argument("--recording", required=True, help="recording_id")
    sp.add_argument("--frame", type=int, default=4096)
    sp.add_argument("--hop", type=int)
    sp.add_argument("--out-spectrum", help="spectrum CSV path")
    sp.set_defaults(func=cmd_spectrum)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive catch-all
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
