"""Attention weight matrices rendered as grayscale images."""
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError

MIN_CELL_PIXELS = 8


def weights_to_image(weights: np.ndarray, cell: int = MIN_CELL_PIXELS) -> Image.Image:
    """Map weights in [0, 1] to gray levels, one ``cell x cell`` square per entry.

    White is weight 1, black is weight 0 (including masked entries).
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.size == 0:
        raise DimensionError(f"heatmap needs a non-empty matrix, got shape {weights.shape}")
    gray = np.clip(np.rint(np.clip(weights, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    image = Image.fromarray(gray)  # 2-D uint8 gives mode "L"
    rows, cols = gray.shape
    return image.resize((cols * cell, rows * cell), Image.Resampling.NEAREST)


def save_heatmap(weights: np.ndarray, path: Path, cell: int = MIN_CELL_PIXELS) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    weights_to_image(weights, cell).save(path, format="PNG")
