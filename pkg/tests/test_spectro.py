"""Rasterization pipeline tests: dB mapping, rendering, resize, PNG, manifests."""

from __future__ import annotations

import io

import numpy as np
import pytest

from vibforge.catalog import HealthLabel
from vibforge.dsp import Segment, SpectrogramMatrix, StftParams, stft
from vibforge.spectro import (
    IMAGES_MANIFEST_HEADER,
    ImageRecord,
    ManifestError,
    RenderParams,
    SpectrogramImage,
    check_manifest_image,
    encode_png,
    image_pipeline,
    pad_band,
    read_images_manifest,
    render,
    resize_bilinear,
    to_db,
    write_images_manifest,
)


def _matrix(values, fs=48000.0, nfft=1600, freq_max=10000.0, window=200, hop=8):
    values = np.asarray(values, dtype=np.float64)
    step = fs / nfft
    return SpectrogramMatrix(
        values=values,
        freq_axis=np.arange(values.shape[0]) * step,
        time_axis=np.arange(values.shape[1]) * hop / fs,
        params=StftParams(window_length=window, hop=hop, nfft=nfft, freq_max=freq_max),
        segment_id="rec#0",
    )


# --- dB conversion ---------------------------------------------------------------

def test_to_db_values():
    grid = np.array([[1.0, 10.0], [100.0, 0.0]])
    db = to_db(grid, epsilon=1e-10)
    assert db[0, 0] == pytest.approx(20 * np.log10(1.0 + 1e-10))
    assert db[0, 1] == pytest.approx(20 * np.log10(10.0 + 1e-10))
    assert db[1, 0] == pytest.approx(40.0, rel=1e-9)
    assert db[1, 1] == pytest.approx(-200.0)  # epsilon floor


def test_to_db_accepts_matrix_and_array():
    m = _matrix(np.ones((3, 4)))
    np.testing.assert_array_equal(to_db(m), to_db(np.ones((3, 4))))


def test_to_db_epsilon_validation():
    with pytest.raises(ValueError):
        to_db(np.ones((2, 2)), epsilon=0.0)


# --- rendering -------------------------------------------------------------------

def test_render_golden_two_by_two():
    grid = np.array([[0.0, 1.0], [2.0, 3.0]])
    inverted = render(grid, RenderParams())
    # invert maps the max to black; flipud puts row 0 (0 Hz) at the bottom
    np.testing.assert_array_equal(inverted.pixels[:, :, 0], [[85, 0], [255, 170]])
    plain = render(grid, RenderParams(invert=False))
    np.testing.assert_array_equal(plain.pixels[:, :, 0], [[170, 255], [0, 85]])
    assert inverted.channels == 1
    assert inverted.pixels.dtype == np.uint8


def test_render_constant_grid():
    flat = render(np.full((4, 5), 3.3), RenderParams())
    np.testing.assert_array_equal(flat.pixels, 255)  # inverted silence is white
    flat_plain = render(np.full((4, 5), 3.3), RenderParams(invert=False))
    np.testing.assert_array_equal(flat_plain.pixels, 0)


def test_render_affine_invariance():
    rng = np.random.default_rng(0)
    grid = rng.uniform(-40, 10, size=(30, 20))
    base = render(grid, RenderParams()).pixels
    scaled = render(3.7 * grid + 11.0, RenderParams()).pixels
    np.testing.assert_array_equal(base, scaled)


def test_render_rejects_empty():
    with pytest.raises(ValueError):
        render(np.zeros((0, 4)), RenderParams())


def test_render_viridis_endpoints():
    img = render(np.array([[0.0], [1.0]]), RenderParams(invert=False, colormap="viridis"))
    assert img.channels == 3
    # flipud: top pixel is the max (yellow), bottom the min (dark purple)
    np.testing.assert_array_equal(img.pixels[0, 0], [253, 231, 37])
    np.testing.assert_array_equal(img.pixels[1, 0], [68, 1, 84])


def test_render_params_validation():
    with pytest.raises(ValueError):
        RenderParams(db_floor_epsilon=0.0)
    with pytest.raises(ValueError):
        RenderParams(target_height=0)
    with pytest.raises(ValueError):
        RenderParams(colormap="jet")


# --- resize ----------------------------------------------------------------------

def _gray_image(pixels):
    arr = np.asarray(pixels, dtype=np.uint8)[:, :, None]
    return SpectrogramImage(pixels=arr, channels=1, segment_id="s", params=RenderParams())


def test_resize_identity_when_target_equals_source():
    rng = np.random.default_rng(1)
    src = rng.integers(0, 256, size=(7, 9), dtype=np.uint8)
    out = resize_bilinear(_gray_image(src), 7, 9)
    np.testing.assert_array_equal(out.pixels[:, :, 0], src)


def test_resize_golden_two_to_three():
    out = resize_bilinear(_gray_image([[0, 10], [20, 30]]), 3, 3)
    np.testing.assert_array_equal(
        out.pixels[:, :, 0], [[0, 5, 10], [10, 15, 20], [20, 25, 30]]
    )


def test_resize_corners_align():
    rng = np.random.default_rng(2)
    src = rng.integers(0, 256, size=(5, 11), dtype=np.uint8)
    out = resize_bilinear(_gray_image(src), 256, 512).pixels[:, :, 0]
    assert out[0, 0] == src[0, 0]
    assert out[0, -1] == src[0, -1]
    assert out[-1, 0] == src[-1, 0]
    assert out[-1, -1] == src[-1, -1]


def test_resize_constant_stays_constant():
    out = resize_bilinear(_gray_image(np.full((3, 4), 77)), 100, 200)
    np.testing.assert_array_equal(out.pixels, 77)


def test_resize_from_single_pixel():
    out = resize_bilinear(_gray_image([[42]]), 8, 16)
    np.testing.assert_array_equal(out.pixels, 42)
    assert out.pixels.shape == (8, 16, 1)


# --- band padding ----------------------------------------------------------------

def test_pad_band_extends_low_rate_grid():
    # 12 kHz grid saturates at 801 rows; padding restores the 10 kHz band
    m = _matrix(np.ones((801, 10)), fs=12000.0)
    padded = pad_band(m)
    assert padded.values.shape == (1334, 10)
    np.testing.assert_array_equal(padded.values[:801], 1.0)
    np.testing.assert_array_equal(padded.values[801:], 0.0)
    step = 12000.0 / 1600
    np.testing.assert_allclose(padded.freq_axis, np.arange(1334) * step)
    assert padded.segment_id == m.segment_id


def test_pad_band_noop_when_band_complete():
    m = _matrix(np.ones((334, 10)), fs=48000.0)
    assert pad_band(m) is m


def test_pad_band_single_row_passthrough():
    m = SpectrogramMatrix(
        values=np.ones((1, 5)),
        freq_axis=np.zeros(1),
        time_axis=np.arange(5, dtype=np.float64),
        params=StftParams(window_length=4, hop=2, nfft=8, freq_max=100.0),
        segment_id="s",
    )
    assert pad_band(m) is m


# --- full pipeline ---------------------------------------------------------------

def test_image_pipeline_emits_fixed_size():
    rng = np.random.default_rng(7)
    seg = Segment(
        samples=rng.standard_normal(3000),
        sampling_rate=12000.0,
        parent_recording="r",
        index=0,
        label=HealthLabel.H,
    )
    params = StftParams(window_length=200, hop=8, nfft=1600, freq_max=10000.0)
    image = image_pipeline(stft(seg, params), RenderParams())
    assert image.pixels.shape == (256, 512, 1)
    assert image.pixels.dtype == np.uint8
    check_manifest_image(image, RenderParams())


# --- PNG -------------------------------------------------------------------------

def test_png_roundtrip_grayscale():
    Image = pytest.importorskip("PIL.Image")
    rng = np.random.default_rng(3)
    pixels = rng.integers(0, 256, size=(20, 30), dtype=np.uint8)
    blob = encode_png(_gray_image(pixels))
    assert blob.startswith(b"\x89PNG\r\n\x1a\n")
    decoded = Image.open(io.BytesIO(blob))
    assert decoded.mode == "L"
    assert decoded.size == (30, 20)  # PIL reports (width, height)
    np.testing.assert_array_equal(np.asarray(decoded), pixels)


def test_png_roundtrip_rgb():
    Image = pytest.importorskip("PIL.Image")
    rng = np.random.default_rng(4)
    pixels = rng.integers(0, 256, size=(8, 5, 3), dtype=np.uint8)
    image = SpectrogramImage(pixels=pixels, channels=3, segment_id="s", params=RenderParams())
    decoded = Image.open(io.BytesIO(encode_png(image)))
    assert decoded.mode == "RGB"
    np.testing.assert_array_equal(np.asarray(decoded), pixels)


def test_png_rejects_bad_shapes():
    bad = SpectrogramImage(
        pixels=np.zeros((4, 4, 2), dtype=np.uint8),
        channels=2,
        segment_id="s",
        params=RenderParams(),
    )
    with pytest.raises(ValueError):
        encode_png(bad)
    not_uint8 = SpectrogramImage(
        pixels=np.zeros((4, 4, 1), dtype=np.float64),
        channels=1,
        segment_id="s",
        params=RenderParams(),
    )
    with pytest.raises(ValueError):
        encode_png(not_uint8)


# --- manifests -------------------------------------------------------------------

def test_images_manifest_roundtrip(tmp_path):
    records = [
        ImageRecord("a#0", "images/a#0.png", "H", "cwru", ""),
        ImageRecord("a#1", "images/a#1.png", "I", "cwru", "2"),
    ]
    path = tmp_path / "images.csv"
    write_images_manifest(records, path)
    assert read_images_manifest(path) == records
    first_line = path.read_text().splitlines()[0]
    assert first_line == ",".join(IMAGES_MANIFEST_HEADER)


def test_images_manifest_rejects_bad_header(tmp_path):
    path = tmp_path / "images.csv"
    path.write_text("segment,path\nx,y\n")
    with pytest.raises(ManifestError):
        read_images_manifest(path)


def test_check_manifest_image_rejects_unresized():
    raw = _gray_image(np.zeros((100, 100), dtype=np.uint8))
    with pytest.raises(ManifestError):
        check_manifest_image(raw, RenderParams())
