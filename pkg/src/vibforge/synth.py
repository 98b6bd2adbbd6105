"""Deterministic synthetic bearing-signal generator.

The signal model is a background shaft sinusoid plus a train of decaying
resonance bursts at a fixed repetition rate plus Gaussian noise. Noise comes
from a fixed, portable PRNG so fixtures are byte-stable across platforms and
reimplementable in any language:

SplitMix64: the k-th raw draw (k = 0, 1, ...) mixes state = seed + (k+1) * G
with G = 0x9E3779B97F4A7C15; mix(z) is
    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
    z ^= z >> 27; z *= 0x94D049BB133111EB;
    z ^= z >> 31
with all arithmetic modulo 2^64. A draw becomes a uniform on (0, 1] via
u = ((z >> 11) + 1) * 2^-53, and uniform pairs become standard normals by
the Box-Muller transform: sqrt(-2 ln u1) * (cos, sin)(2 pi u2), interleaved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import BUILTIN_DATASETS, Catalog, HealthLabel, RecordingMeta, save_catalog
from .dsp import TimeSeries


class SynthError(Exception):
    pass


class InvalidSpec(SynthError):
    pass


class IoError(SynthError):
    pass


SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First `count` raw 64-bit draws of the documented SplitMix64 stream."""
    if count < 0:
        raise ValueError("count must be >= 0")
    k = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed & _MASK64) + k * np.uint64(SPLITMIX64_GAMMA)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


def gaussian_noise(seed: int, count: int) -> np.ndarray:
    """`count` standard normals from the documented Box-Muller construction."""
    if count == 0:
        return np.zeros(0)
    pairs = (count + 1) // 2
    z = splitmix64(seed, 2 * pairs)
    u = ((z >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * math.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


@dataclass(frozen=True)
class SynthSpec:
    sampling_rate: float
    duration: float
    impulse_rate: float  # fault repetition, Hz; 0 means no impulse train
    resonance_freq: float
    damping: float  # exponential decay of each burst, 1/s
    impulse_amplitude: float
    shaft_freq: float
    shaft_amplitude: float
    noise_sigma: float
    label: HealthLabel
    seed: int

    def __post_init__(self) -> None:
        if self.sampling_rate <= 0 or self.duration <= 0:
            raise InvalidSpec("sampling_rate and duration must be positive")
        if self.impulse_rate < 0:
            raise InvalidSpec("impulse_rate must be >= 0")
        if self.resonance_freq >= self.sampling_rate / 2:
            raise InvalidSpec(
                f"resonance_freq {self.resonance_freq} is not below the Nyquist "
                f"frequency {self.sampling_rate / 2}"
            )
        if self.damping < 0:
            raise InvalidSpec("damping must be >= 0")
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if self.label is HealthLabel.H and self.impulse_rate != 0:
            raise InvalidSpec("a healthy spec must have impulse_rate 0")


def _signal(spec: SynthSpec) -> np.ndarray:
    n = int(round(spec.duration * spec.sampling_rate))
    t = np.arange(n) / spec.sampling_rate
    x = spec.shaft_amplitude * np.sin(2.0 * math.pi * spec.shaft_freq * t)
    if spec.impulse_rate > 0:
        # a burst is negligible once its envelope drops below ~1.5e-8
        if spec.damping > 0:
            tail = min(spec.duration, 18.0 / spec.damping)
            tail_samples = int(math.ceil(tail * spec.sampling_rate))
        else:
            tail_samples = n
        k = 0
        while True:
            t_k = k / spec.impulse_rate
            if t_k >= spec.duration:
                break
            start = int(math.ceil(t_k * spec.sampling_rate - 1e-9))
            stop = min(n, start + tail_samples)
            if start < stop:
                offset = t[start:stop] - t_k
                x[start:stop] += (
                    spec.impulse_amplitude
                    * np.exp(-spec.damping * offset)
                    * np.sin(2.0 * math.pi * spec.resonance_freq * offset)
                )
            k += 1
    if spec.noise_sigma > 0:
        x += spec.noise_sigma * gaussian_noise(spec.seed, n)
    return x


def generate(
    spec: SynthSpec,
    recording_id: str = "synth",
    *,
    source_file: str = "",
    load_value: float | None = None,
    load_unit: str = "",
    severity_value: str = "",
) -> tuple[TimeSeries, RecordingMeta]:
    samples = _signal(spec)
    series = TimeSeries(samples=samples, sampling_rate=spec.sampling_rate)
    meta = RecordingMeta(
        recording_id=recording_id,
        dataset_id="synthetic",
        equipment="synthetic-rig",
        sampling_rate=spec.sampling_rate,
        duration=series.duration,
        shaft_speed=spec.shaft_freq * 60.0,
        load_value=load_value,
        load_unit=load_unit,
        sensor_position="ACC",
        label=spec.label,
        severity_value=severity_value,
        severity_unit="in" if severity_value else "",
        source_file=source_file or f"{recording_id}.csv",
        channel_pattern="",
    )
    return series, meta


MINI_SEVERITIES = ("0.007", "0.014", "0.021", "0.028")

# impulse repetition rate (Hz) and resonance band (Hz) per fault class;
# distinct bands keep the classes separable by a spectrogram model
_MINI_CLASS_PARAMS = {
    HealthLabel.H: (0.0, 1000.0),
    HealthLabel.I: (53.0, 2200.0),
    HealthLabel.O: (36.0, 1400.0),
    HealthLabel.B: (24.0, 2900.0),
}

MINI_SAMPLING_RATE = 8000.0
MINI_DURATION = 10.0


def mini_specs() -> list[tuple[SynthSpec, str, float, str]]:
    """The "mini" preset: (spec, recording_id, load, severity) for 4 classes
    x loads {0,1,2,3} x 2 repeats, 10 s at 8 kHz each."""
    out: list[tuple[SynthSpec, str, float, str]] = []
    for label in (HealthLabel.H, HealthLabel.I, HealthLabel.O, HealthLabel.B):
        impulse_rate, resonance = _MINI_CLASS_PARAMS[label]
        for load in range(4):
            for rep in range(2):
                if label is HealthLabel.H:
                    severity = ""
                    amplitude = 0.0
                else:
                    sev_index = (load + 2 * rep) % 4
                    severity = MINI_SEVERITIES[sev_index]
                    amplitude = 1.2 + 0.3 * sev_index
                recording_id = f"mini_{label.value}_L{load}_R{rep}"
                spec = SynthSpec(
                    sampling_rate=MINI_SAMPLING_RATE,
                    duration=MINI_DURATION,
                    impulse_rate=impulse_rate,
                    resonance_freq=resonance,
                    damping=300.0,
                    impulse_amplitude=amplitude,
                    shaft_freq=29.95 - 0.4 * load,
                    shaft_amplitude=1.0,
                    noise_sigma=0.1,
                    label=label,
                    seed=hash_seed(recording_id),
                )
                out.append((spec, recording_id, float(load), severity))
    return out


def hash_seed(name: str) -> int:
    """Stable per-recording seed: SplitMix64-mixed byte fold of the name."""
    acc = 0
    for b in name.encode("utf-8"):
        acc = (acc * 0x100000001B3 + b) & _MASK64
    return int(splitmix64(acc, 1)[0])


def benchmark_fixture(profile: str, out_dir: str | Path) -> Catalog:
    """Write a miniature catalog plus 1-column CSV signal files so folds,
    baseline, and eval can run end-to-end in seconds."""
    if profile != "mini":
        raise InvalidSpec(f"unknown preset {profile!r}")
    out_dir = Path(out_dir)
    signals_dir = out_dir / "signals"
    try:
        signals_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {signals_dir}: {exc}") from exc

    recordings: list[RecordingMeta] = []
    for spec, recording_id, load, severity in mini_specs():
        rel = f"signals/{recording_id}.csv"
        series, meta = generate(
            spec,
            recording_id,
            source_file=rel,
            load_value=load,
            load_unit="hp",
            severity_value=severity,
        )
        lines = [repr(float(v)) for v in series.samples]
        try:
            (out_dir / rel).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {out_dir / rel}: {exc}") from exc
        recordings.append(meta)

    catalog = Catalog(datasets=dict(BUILTIN_DATASETS), recordings=tuple(recordings))
    try:
        save_catalog(catalog, out_dir / "catalog.csv")
    except OSError as exc:
        raise IoError(f"cannot write catalog: {exc}") from exc
    return catalog
