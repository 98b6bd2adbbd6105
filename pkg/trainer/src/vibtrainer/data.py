"""Spectrogram image loading for training.

Images arrive as PNG files referenced by the images manifest. Grayscale
images are replicated to three channels because the backbone expects RGB
input; RGB images pass through. Pixel values are scaled to [0, 1].
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

from .errors import SchemaMismatch
from .manifests import ImageRow


def load_image_tensor(path) -> torch.Tensor:
    """PNG file -> float32 tensor of shape (3, H, W) in [0, 1]."""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[None, :, :], 3, axis=0)
    else:
        arr = arr.transpose(2, 0, 1)
    return torch.from_numpy(np.ascontiguousarray(arr))


class SpectrogramImages(Dataset):
    """Manifest rows -> (image tensor, class index) pairs.

    Rows whose label is outside ``class_to_index`` (possible at prediction
    time) get target -1; training datasets must not contain such rows.
    """

    def __init__(self, rows: Sequence[ImageRow], class_to_index: Mapping[str, int]):
        missing = [str(row.png_path) for row in rows if not row.png_path.is_file()]
        if missing:
            shown = ", ".join(missing[:3])
            raise SchemaMismatch(
                f"{len(missing)} image file(s) from the manifest do not exist: {shown}"
            )
        self.rows = list(rows)
        self.class_to_index = dict(class_to_index)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int]:
        row = self.rows[index]
        return load_image_tensor(row.png_path), self.class_to_index.get(row.label, -1)
