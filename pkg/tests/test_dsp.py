"""Segmentation, STFT, spectrum, and statistics tests against direct-formula oracles."""

from __future__ import annotations

import numpy as np
import pytest

import oracles
from vibforge.catalog import HealthLabel
from vibforge.dsp import (
    DegenerateSignal,
    EmptySeries,
    Segment,
    SegmentTooShort,
    SeriesTooShort,
    StftParams,
    TimeSeries,
    fourier_spectrum,
    hann_window,
    hop_from_overlap,
    segment,
    segment_count,
    segment_length_for,
    statistical_features,
    stft,
    stft_dims,
)


def _seg(samples, rate=48000.0, rec="rec", index=0):
    return Segment(
        samples=np.asarray(samples, dtype=np.float64),
        sampling_rate=rate,
        parent_recording=rec,
        index=index,
        label=HealthLabel.H,
    )


# --- segmentation ---------------------------------------------------------------

def test_ten_seconds_at_48k_gives_40_segments_of_12000():
    series = TimeSeries(samples=np.zeros(480000), sampling_rate=48000.0)
    segments = segment(series, 0.25, recording_id="r")
    assert len(segments) == 40
    assert all(s.samples.size == 12000 for s in segments)
    assert segments[0].segment_id == "r#0"
    assert segments[-1].segment_id == "r#39"


def test_segment_drops_trailing_remainder():
    series = TimeSeries(samples=np.arange(12000 * 2 + 5000), sampling_rate=48000.0)
    segments = segment(series, 0.25, recording_id="r")
    assert len(segments) == 2
    np.testing.assert_array_equal(segments[1].samples, np.arange(12000, 24000))


def test_segment_window_overrides():
    series = TimeSeries(samples=np.arange(1000), sampling_rate=100.0)
    segments = segment(series, 0.25, recording_id="r", segment_samples=300)
    assert [s.samples.size for s in segments] == [300, 300, 300]


def test_segment_length_rule():
    assert segment_length_for(48000.0) == 12000
    assert segment_length_for(42000.0) == 10500
    assert segment_length_for(51200.0) == 12800
    assert segment_length_for(64000.0) == 16000
    assert segment_length_for(8000.0, 0.5) == 4000
    assert segment_count(480000, 12000) == 40
    assert segment_count(11999, 12000) == 0


def test_empty_series_rejected():
    with pytest.raises(EmptySeries):
        TimeSeries(samples=np.array([]), sampling_rate=100.0)
    with pytest.raises(EmptySeries):
        TimeSeries(samples=np.zeros((4, 4)), sampling_rate=100.0)


def test_series_duration_property():
    series = TimeSeries(samples=np.zeros(480000), sampling_rate=48000.0)
    assert series.duration == 10.0


# --- window and params ----------------------------------------------------------

def test_hann_matches_oracle_and_is_periodic():
    for width in (8, 200, 180, 333):
        np.testing.assert_array_equal(hann_window(width), oracles.hann_periodic(width))
    w = hann_window(200)
    assert w[0] == 0.0
    assert w[100] == 1.0  # midpoint of the periodic taper hits exactly 1
    # periodic (DFT-even) taper vanishes only at n=0, unlike the symmetric one
    assert w[199] > 0.0


def test_stft_params_validation():
    with pytest.raises(ValueError):
        StftParams(window_length=200, hop=0, nfft=1600, freq_max=10000.0)
    with pytest.raises(ValueError):
        StftParams(window_length=200, hop=300, nfft=1600, freq_max=10000.0)
    with pytest.raises(ValueError):
        StftParams(window_length=2000, hop=8, nfft=1600, freq_max=10000.0)
    with pytest.raises(ValueError):
        StftParams(window_length=200, hop=8, nfft=1600, freq_max=-1.0)
    with pytest.raises(ValueError):
        StftParams(window_length=200, hop=8, nfft=1600, freq_max=10000.0, window_kind="hamming")


def test_hop_from_overlap():
    assert hop_from_overlap(200, 0.96) == 8
    assert hop_from_overlap(180, 0.96) == 7
    assert hop_from_overlap(200, 0.0) == 200
    assert hop_from_overlap(4, 0.999) == 1  # floor at 1
    with pytest.raises(ValueError):
        hop_from_overlap(200, 1.0)
    with pytest.raises(ValueError):
        hop_from_overlap(200, -0.1)


# --- dimension rules ------------------------------------------------------------

def test_output_dims_match_published_grids():
    p200 = StftParams(window_length=200, hop=8, nfft=1600, freq_max=10000.0)
    p180_7 = StftParams(window_length=180, hop=7, nfft=1600, freq_max=10000.0)
    assert stft_dims(12000, 48000.0, p200) == (334, 1476)
    assert stft_dims(10500, 42000.0, p180_7) == (381, 1475)
    assert stft_dims(12800, 51200.0, p200) == (313, 1576)
    assert stft_dims(16000, 64000.0, p180_7) == (251, 2261)


def test_dims_saturate_at_nyquist():
    params = StftParams(window_length=200, hop=8, nfft=1600, freq_max=10000.0)
    # 12 kHz sampling: the 10 kHz crop exceeds the 6 kHz Nyquist bin
    n_freq, n_time = stft_dims(3000, 12000.0, params)
    assert n_freq == 1600 // 2 + 1 == 801
    assert n_time == 1 + (3000 - 200) // 8


def test_stft_values_match_oracle():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(700)
    params = StftParams(window_length=64, hop=16, nfft=128, freq_max=1500.0)
    seg = _seg(x, rate=8000.0)
    result = stft(seg, params)
    n_freq, n_time = stft_dims(700, 8000.0, params)
    assert result.values.shape == (n_freq, n_time)
    expected = oracles.dft_magnitudes(x, 64, 16, 128)[:n_freq, :]
    scale = float(np.max(expected))
    np.testing.assert_allclose(result.values, expected, rtol=1e-9, atol=1e-9 * scale)


def test_stft_axes():
    x = np.ones(700)
    params = StftParams(window_length=64, hop=16, nfft=128, freq_max=1500.0)
    result = stft(_seg(x, rate=8000.0), params)
    step = 8000.0 / 128
    np.testing.assert_allclose(result.freq_axis, np.arange(result.values.shape[0]) * step)
    np.testing.assert_allclose(result.time_axis, np.arange(result.values.shape[1]) * 16 / 8000.0)
    assert result.freq_axis[-1] <= 1500.0
    assert result.freq_axis[-1] + step > 1500.0
    assert result.segment_id == "rec#0"


def test_stft_is_linear_in_amplitude():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(500)
    params = StftParams(window_length=50, hop=10, nfft=64, freq_max=999999.0)
    base = stft(_seg(x, rate=1000.0), params).values
    doubled = stft(_seg(2.0 * x, rate=1000.0), params).values
    np.testing.assert_allclose(doubled, 2.0 * base, rtol=1e-12)


def test_stft_frame_energy_conservation():
    # Parseval per frame: time-domain energy of the tapered frame equals
    # (|X_0|^2 + |X_{n/2}|^2 + 2 * sum of interior one-sided bins) / nfft.
    rng = np.random.default_rng(11)
    x = rng.standard_normal(400)
    w, hop, nfft = 64, 32, 128
    params = StftParams(window_length=w, hop=hop, nfft=nfft, freq_max=1e12)
    mags = stft(_seg(x, rate=1000.0), params).values
    taper = hann_window(w)
    for k in range(mags.shape[1]):
        frame = x[k * hop : k * hop + w] * taper
        time_energy = float(np.sum(frame * frame))
        col = mags[:, k]
        freq_energy = (col[0] ** 2 + col[-1] ** 2 + 2.0 * np.sum(col[1:-1] ** 2)) / nfft
        assert freq_energy == pytest.approx(time_energy, rel=1e-9)


def test_oracle_internal_parseval():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    assert oracles.frame_parseval_residual(x, 50, 25, 64) < 1e-9


def test_pure_tone_concentrates_on_its_bin():
    fs, nfft = 1024.0, 256
    bin_index = 40
    tone_freq = bin_index * fs / nfft  # exactly bin-centered
    t = np.arange(2048) / fs
    x = np.sin(2 * np.pi * tone_freq * t)
    params = StftParams(window_length=256, hop=64, nfft=nfft, freq_max=fs)
    mags = stft(_seg(x, rate=fs), params).values
    for k in range(mags.shape[1]):
        assert int(np.argmax(mags[:, k])) == bin_index
    # Hann sidelobes decay fast: 4 bins away the response is tiny
    peak = float(mags[bin_index].max())
    away = np.delete(mags, [bin_index - 1, bin_index, bin_index + 1], axis=0)
    assert float(away.max()) < 0.01 * peak


def test_stft_rejects_short_segment():
    params = StftParams(window_length=200, hop=8, nfft=1600, freq_max=10000.0)
    with pytest.raises(SegmentTooShort):
        stft(_seg(np.zeros(100)), params)


# --- averaged spectrum ----------------------------------------------------------

def test_fourier_spectrum_peaks_at_tone():
    fs, frame = 2048.0, 512
    tone = 96 * fs / frame
    t = np.arange(4096) / fs
    series = TimeSeries(samples=np.sin(2 * np.pi * tone * t), sampling_rate=fs)
    spec = fourier_spectrum(series, frame, frame // 2)
    assert spec.magnitude.shape == (frame // 2 + 1,)
    assert int(np.argmax(spec.magnitude)) == 96
    assert spec.freq_axis[96] == pytest.approx(tone)


def test_fourier_spectrum_averages_frames():
    fs = 100.0
    series = TimeSeries(samples=np.ones(300), sampling_rate=fs)
    spec = fourier_spectrum(series, 100, 50)
    # constant signal: all energy at DC, magnitude = frame length, any frame count
    assert spec.magnitude[0] == pytest.approx(100.0)
    np.testing.assert_allclose(spec.magnitude[1:], 0.0, atol=1e-10)


def test_fourier_spectrum_errors():
    series = TimeSeries(samples=np.ones(100), sampling_rate=100.0)
    with pytest.raises(SeriesTooShort):
        fourier_spectrum(series, 200, 100)
    with pytest.raises(ValueError):
        fourier_spectrum(series, 50, 0)


# --- statistics -----------------------------------------------------------------

def test_statistics_match_oracle_formulas():
    rng = np.random.default_rng(9)
    for trial in range(10):
        x = rng.standard_normal(257) * (trial + 1) + rng.uniform(-2, 2)
        got = statistical_features(_seg(x))
        want = oracles.feature_formulas(x)
        for name in want:
            assert getattr(got, name) == pytest.approx(want[name], rel=1e-12), name


def test_statistics_of_full_period_sine():
    # Integer periods make the discrete moments exact: rms = A/sqrt(2),
    # kurtosis = (3/8) / (1/2)^2 = 1.5, skewness = 0, crest = sqrt(2).
    amp = 3.0
    n, periods = 1000, 10
    x = amp * np.sin(2 * np.pi * periods * np.arange(n) / n)
    got = statistical_features(_seg(x))
    assert got.rms == pytest.approx(amp / np.sqrt(2), rel=1e-12)
    assert got.variance == pytest.approx(amp**2 / 2, rel=1e-12)
    assert got.kurtosis == pytest.approx(1.5, rel=1e-12)
    assert abs(got.skewness) < 1e-12
    assert got.crest_factor == pytest.approx(np.sqrt(2), rel=1e-12)
    assert got.peak_to_peak == pytest.approx(2 * amp, rel=1e-10)
    # abs-mean statistics approach their continuum values 2A/pi as n grows
    assert got.shape_factor == pytest.approx(np.pi / (2 * np.sqrt(2)), rel=1e-3)
    assert got.impulse_factor == pytest.approx(np.pi / 2, rel=1e-3)


def test_statistics_reject_degenerate_input():
    with pytest.raises(DegenerateSignal):
        statistical_features(_seg(np.full(100, 7.0)))
    with pytest.raises(ValueError):
        statistical_features(_seg(np.array([1.0])))


def test_feature_vector_field_order():
    from vibforge.dsp import FeatureVector

    assert FeatureVector.FIELDS == (
        "rms",
        "variance",
        "skewness",
        "kurtosis",
        "crest_factor",
        "peak_to_peak",
        "shape_factor",
        "impulse_factor",
    )
