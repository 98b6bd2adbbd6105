"""Segmentation, the discrete STFT, averaged Fourier spectra, and signal statistics.

The STFT here is the frame-local transform: frame k covers samples
[k*hop, k*hop + w), gets a periodic Hann taper, is zero-padded to nfft, and
contributes one column of one-sided DFT magnitudes. A formulation that
attaches the phase reference to the window center differs only by a
unit-modulus factor, so the magnitude grid is identical either way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import HealthLabel


class DspError(Exception):
    pass


class EmptySeries(DspError):
    pass


class SegmentTooShort(DspError):
    pass


class SeriesTooShort(DspError):
    pass


class DegenerateSignal(DspError):
    """All samples equal: shape/impulse/skewness/kurtosis are undefined."""


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    sampling_rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise EmptySeries("TimeSeries requires a non-empty 1-D sample array")
        if self.sampling_rate <= 0:
            raise ValueError("sampling_rate must be > 0")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sampling_rate


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    sampling_rate: float
    parent_recording: str
    index: int
    label: HealthLabel

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.index < 0:
            raise ValueError("segment index must be >= 0")

    @property
    def segment_id(self) -> str:
        return f"{self.parent_recording}#{self.index}"


@dataclass(frozen=True)
class StftParams:
    window_length: int
    hop: int
    nfft: int
    freq_max: float
    window_kind: str = "hann"

    def __post_init__(self) -> None:
        if not (0 < self.hop <= self.window_length <= self.nfft):
            raise ValueError("require 0 < hop <= window_length <= nfft")
        if self.freq_max <= 0:
            raise ValueError("freq_max must be > 0")
        if self.window_kind != "hann":
            raise ValueError("only the Hann window is supported")


@dataclass(frozen=True)
class SpectrogramMatrix:
    values: np.ndarray  # F x T magnitudes, row 0 = 0 Hz
    freq_axis: np.ndarray
    time_axis: np.ndarray
    params: StftParams
    segment_id: str


@dataclass(frozen=True)
class Spectrum:
    freq_axis: np.ndarray
    magnitude: np.ndarray


@dataclass(frozen=True)
class FeatureVector:
    rms: float
    variance: float
    skewness: float
    kurtosis: float
    crest_factor: float
    peak_to_peak: float
    shape_factor: float
    impulse_factor: float

    FIELDS = (
        "rms",
        "variance",
        "skewness",
        "kurtosis",
        "crest_factor",
        "peak_to_peak",
        "shape_factor",
        "impulse_factor",
    )


def hann_window(width: int) -> np.ndarray:
    """Periodic Hann taper: w[n] = 0.5 * (1 - cos(2*pi*n/width)), n = 0..width-1."""
    n = np.arange(width, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / width))


def segment_count(n_samples: int, segment_length: int) -> int:
    return n_samples // segment_length


def segment_length_for(sampling_rate: float, duration: float = 0.25) -> int:
    return int(round(duration * sampling_rate))


def segment(
    series: TimeSeries,
    duration: float = 0.25,
    *,
    recording_id: str = "",
    label: HealthLabel = HealthLabel.H,
    segment_samples: int | None = None,
) -> list[Segment]:
    """Slice into consecutive non-overlapping windows; trailing remainder dropped.

    The window is round(duration * sampling_rate) samples; segment_samples
    overrides it for sources whose published sample count disagrees with the
    duration rule.
    """
    length = segment_samples if segment_samples else segment_length_for(series.sampling_rate, duration)
    if length < 1:
        raise ValueError("duration * sampling_rate must be >= 1")
    count = segment_count(series.samples.size, length)
    return [
        Segment(
            samples=series.samples[i * length : (i + 1) * length],
            sampling_rate=series.sampling_rate,
            parent_recording=recording_id,
            index=i,
            label=label,
        )
        for i in range(count)
    ]


def hop_from_overlap(window_length: int, overlap: float = 0.96) -> int:
    """hop = max(1, round(window_length * (1 - overlap)))."""
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    return max(1, round(window_length * (1.0 - overlap)))


def stft_dims(n_samples: int, sampling_rate: float, params: StftParams) -> tuple[int, int]:
    """Closed-form output dims: F = 1 + floor(min(fmax, fs/2) * nfft / fs), T = 1 + floor((N-w)/hop)."""
    if params.freq_max >= sampling_rate / 2:
        n_freq = params.nfft // 2 + 1
    else:
        n_freq = 1 + int(params.freq_max * params.nfft / sampling_rate)
    n_time = 1 + (n_samples - params.window_length) // params.hop
    return n_freq, n_time


def stft(seg: Segment, params: StftParams) -> SpectrogramMatrix:
    """One-sided STFT magnitudes cropped to frequencies <= min(freq_max, Nyquist)."""
    x = seg.samples
    n = x.size
    w = params.window_length
    if n < w:
        raise SegmentTooShort(f"{seg.segment_id}: {n} samples < window {w}")
    fs = seg.sampling_rate
    n_freq, n_time = stft_dims(n, fs, params)

    starts = np.arange(n_time) * params.hop
    frames = x[starts[:, None] + np.arange(w)[None, :]]
    frames = frames * hann_window(w)
    mags = np.abs(np.fft.rfft(frames, n=params.nfft, axis=1))  # T x (nfft/2 + 1)
    values = np.ascontiguousarray(mags[:, :n_freq].T)

    freq_axis = np.arange(n_freq, dtype=np.float64) * (fs / params.nfft)
    time_axis = starts / fs
    return SpectrogramMatrix(
        values=values,
        freq_axis=freq_axis,
        time_axis=time_axis,
        params=params,
        segment_id=seg.segment_id,
    )


def fourier_spectrum(series: TimeSeries, frame: int, hop: int) -> Spectrum:
    """Mean over frames of one-sided un-windowed FFT magnitudes."""
    x = series.samples
    if x.size < frame:
        raise SeriesTooShort(f"{x.size} samples < frame {frame}")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    n_frames = 1 + (x.size - frame) // hop
    starts = np.arange(n_frames) * hop
    frames = x[starts[:, None] + np.arange(frame)[None, :]]
    mags = np.abs(np.fft.rfft(frames, axis=1))
    freq_axis = np.arange(frame // 2 + 1, dtype=np.float64) * (series.sampling_rate / frame)
    return Spectrum(freq_axis=freq_axis, magnitude=mags.mean(axis=0))


def statistical_features(seg: Segment) -> FeatureVector:
    """Eight time-domain statistics; population (N-denominator) moments."""
    x = seg.samples
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    if np.all(x == x[0]):
        raise DegenerateSignal(f"{seg.segment_id}: constant signal")
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    rms = float(np.sqrt(np.mean(x**2)))
    abs_mean = float(np.mean(np.abs(x)))
    peak = float(np.max(np.abs(x)))
    return FeatureVector(
        rms=rms,
        variance=m2,
        skewness=m3 / m2**1.5,
        kurtosis=m4 / m2**2,
        crest_factor=peak / rms,
        peak_to_peak=float(np.max(x) - np.min(x)),
        shape_factor=rms / abs_mean,
        impulse_factor=peak / abs_mean,
    )
