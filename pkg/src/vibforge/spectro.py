"""Spectrogram rasterization: dB conversion, rendering, resize, PNG output.

The pixel pipeline is: magnitude grid -> optional zero-magnitude band padding
up to freq_max (so low-sample-rate sources share the frequency scale of the
rest) -> dB -> min-max normalize -> 8-bit image with 0 Hz at the bottom ->
corner-aligned bilinear resize to the fixed network-input size -> PNG.
"""

from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import SpectrogramMatrix


class SpectroError(Exception):
    pass


class ManifestError(SpectroError):
    """An image violates the manifest's post-resize schema."""


@dataclass(frozen=True)
class RenderParams:
    db_floor_epsilon: float = 1e-10
    invert: bool = True
    colormap: str = "grayscale"  # "grayscale" | "viridis"
    target_height: int = 256  # frequency axis
    target_width: int = 512  # time axis

    def __post_init__(self) -> None:
        if self.db_floor_epsilon <= 0:
            raise ValueError("db_floor_epsilon must be > 0")
        if self.target_height < 1 or self.target_width < 1:
            raise ValueError("target dims must be >= 1")
        if self.colormap not in ("grayscale", "viridis"):
            raise ValueError(f"unknown colormap {self.colormap!r}")


@dataclass(frozen=True)
class SpectrogramImage:
    pixels: np.ndarray  # H x W x channels, uint8
    channels: int
    segment_id: str
    params: RenderParams


def to_db(matrix: SpectrogramMatrix | np.ndarray, epsilon: float = 1e-10) -> np.ndarray:
    """Element-wise 20 * log10(value + epsilon)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    values = matrix.values if isinstance(matrix, SpectrogramMatrix) else np.asarray(matrix)
    return 20.0 * np.log10(values + epsilon)


def pad_band(matrix: SpectrogramMatrix) -> SpectrogramMatrix:
    """Extend the grid with zero-magnitude rows up to params.freq_max.

    A no-op when the frequency axis already reaches the crop band; applies to
    sources whose Nyquist sits below freq_max, so every rendered image spans
    the same frequency range.
    """
    step = float(matrix.freq_axis[1] - matrix.freq_axis[0]) if matrix.freq_axis.size > 1 else None
    if step is None:
        return matrix
    target_rows = 1 + int(matrix.params.freq_max / step)
    have = matrix.values.shape[0]
    if target_rows <= have:
        return matrix
    pad = np.zeros((target_rows - have, matrix.values.shape[1]), dtype=matrix.values.dtype)
    values = np.vstack([matrix.values, pad])
    freq_axis = np.arange(target_rows, dtype=np.float64) * step
    return SpectrogramMatrix(
        values=values,
        freq_axis=freq_axis,
        time_axis=matrix.time_axis,
        params=matrix.params,
        segment_id=matrix.segment_id,
    )


# Anchor colors approximating the familiar dark-purple-to-yellow map.
_VIRIDIS_ANCHORS = np.array(
    [
        (68, 1, 84),
        (72, 40, 120),
        (62, 74, 137),
        (49, 104, 142),
        (38, 130, 142),
        (31, 158, 137),
        (53, 183, 121),
        (109, 205, 89),
        (180, 222, 44),
        (253, 231, 37),
    ],
    dtype=np.float64,
)


def _viridis_lut() -> np.ndarray:
    positions = np.linspace(0.0, 1.0, len(_VIRIDIS_ANCHORS))
    xs = np.linspace(0.0, 1.0, 256)
    lut = np.stack(
        [np.interp(xs, positions, _VIRIDIS_ANCHORS[:, c]) for c in range(3)], axis=1
    )
    return np.rint(lut).astype(np.uint8)


_LUT = _viridis_lut()


def render(db_grid: np.ndarray, params: RenderParams, segment_id: str = "") -> SpectrogramImage:
    """Min-max normalize and rasterize; row 0 (0 Hz) ends up at the image bottom."""
    grid = np.asarray(db_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty grid")
    lo = grid.min()
    hi = grid.max()
    norm = np.zeros_like(grid) if hi == lo else (grid - lo) / (hi - lo)
    level = (1.0 - norm) if params.invert else norm
    intensity = np.rint(255.0 * level).astype(np.uint8)
    intensity = np.flipud(intensity)
    if params.colormap == "grayscale":
        pixels = intensity[:, :, None]
        channels = 1
    else:
        pixels = _LUT[intensity]
        channels = 3
    return SpectrogramImage(pixels=pixels, channels=channels, segment_id=segment_id, params=params)


def resize_bilinear(
    image: SpectrogramImage, target_height: int = 256, target_width: int = 512
) -> SpectrogramImage:
    """Corner-aligned bilinear resample to exactly the target size.

    Sample positions are linspace(0, src-1, target) per axis, so the four
    corners map to the four source corners; a 1-wide target samples position 0.
    """
    src = image.pixels.astype(np.float64)
    h, w = src.shape[:2]
    ys = np.linspace(0.0, h - 1.0, target_height)
    xs = np.linspace(0.0, w - 1.0, target_width)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bottom = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    pixels = np.rint(out).astype(np.uint8)
    return SpectrogramImage(
        pixels=pixels, channels=image.channels, segment_id=image.segment_id, params=image.params
    )


def image_pipeline(matrix: SpectrogramMatrix, params: RenderParams) -> SpectrogramImage:
    """Full matrix-to-image path: band pad, dB, render, resize."""
    padded = pad_band(matrix)
    db = to_db(padded, params.db_floor_epsilon)
    raw = render(db, params, segment_id=matrix.segment_id)
    return resize_bilinear(raw, params.target_height, params.target_width)


def _png_chunk(kind: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + kind
        + payload
        + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
    )


def encode_png(image: SpectrogramImage) -> bytes:
    """Minimal PNG writer: 8-bit grayscale or RGB, filter 0 on every scanline."""
    pixels = image.pixels
    if pixels.dtype != np.uint8 or pixels.ndim != 3:
        raise ValueError("expected an H x W x C uint8 pixel grid")
    h, w, channels = pixels.shape
    if channels == 1:
        color_type = 0
    elif channels == 3:
        color_type = 2
    else:
        raise ValueError(f"unsupported channel count {channels}")
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    raw = b"".join(b"\x00" + pixels[row].tobytes() for row in range(h))
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", zlib.compress(raw, 9))
        + _png_chunk(b"IEND", b"")
    )


IMAGES_MANIFEST_HEADER = ["segment_id", "png_path", "label", "dataset_id", "fold"]


@dataclass(frozen=True)
class ImageRecord:
    segment_id: str
    png_path: str
    label: str
    dataset_id: str
    fold: str  # fold index as text, or "" when no plan was given


def write_images_manifest(records: list[ImageRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(IMAGES_MANIFEST_HEADER)
        for rec in records:
            writer.writerow([rec.segment_id, rec.png_path, rec.label, rec.dataset_id, rec.fold])


def read_images_manifest(path: str | Path) -> list[ImageRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != IMAGES_MANIFEST_HEADER:
            raise ManifestError(f"bad images manifest header: {header}")
        return [ImageRecord(*row) for row in reader if row]


def check_manifest_image(image: SpectrogramImage, params: RenderParams) -> None:
    """Manifest rows may only reference post-resize images."""
    h, w = image.pixels.shape[:2]
    if (h, w) != (params.target_height, params.target_width):
        raise ManifestError(
            f"{image.segment_id or 'image'}: size {h}x{w} is not the post-resize "
            f"{params.target_height}x{params.target_width}"
        )
