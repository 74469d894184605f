"""Image and trimap reading/writing.

All in-memory images are float64 in [0, 1], RGB channel order, row-major.
Files are read and written with OpenCV so 8- and 16-bit PNGs work in both
directions.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .core import BACKGROUND, BG_LEVEL, FG_LEVEL, FOREGROUND, UNKNOWN


def _read(path: str | Path, flags: int) -> np.ndarray:
    data = cv2.imread(str(path), flags)
    if data is None:
        raise OSError(f"could not read image: {path}")
    if data.dtype == np.uint8:
        scale = 255.0
    elif data.dtype == np.uint16:
        scale = 65535.0
    else:
        raise OSError(f"unsupported pixel type {data.dtype} in {path}")
    return data.astype(np.float64) / scale


def load_image(path: str | Path) -> np.ndarray:
    """Load a color image as (H, W, 3) float64 RGB in [0, 1]."""
    data = _read(path, cv2.IMREAD_COLOR | cv2.IMREAD_ANYDEPTH)
    return np.ascontiguousarray(data[:, :, ::-1])


def load_grayscale(path: str | Path) -> np.ndarray:
    """Load a single-channel image as (H, W) float64 in [0, 1]."""
    return _read(path, cv2.IMREAD_GRAYSCALE | cv2.IMREAD_ANYDEPTH)


def _quantize(values: np.ndarray, bits: int) -> np.ndarray:
    if bits == 8:
        top, dtype = 255, np.uint8
    elif bits == 16:
        top, dtype = 65535, np.uint16
    else:
        raise ValueError("bits must be 8 or 16")
    scaled = np.rint(np.clip(values, 0.0, 1.0) * top)
    return scaled.astype(dtype)


def save_grayscale(path: str | Path, values: np.ndarray, bits: int = 8):
    """Write a single-channel image; values are clipped to [0, 1]."""
    if not cv2.imwrite(str(path), _quantize(values, bits)):
        raise OSError(f"could not write image: {path}")


def save_image(path: str | Path, rgb: np.ndarray, bits: int = 8):
    """Write an RGB image; values are clipped to [0, 1]."""
    data = _quantize(rgb, bits)
    if not cv2.imwrite(str(path), np.ascontiguousarray(data[:, :, ::-1])):
        raise OSError(f"could not write image: {path}")


def labels_from_grayscale(gray: np.ndarray) -> np.ndarray:
    """Decode a grayscale trimap into region labels.

    Values at or above :data:`FG_LEVEL` become foreground, values at or
    below :data:`BG_LEVEL` background, everything in between unknown.
    """
    labels = np.full(gray.shape, UNKNOWN, dtype=np.uint8)
    labels[gray >= FG_LEVEL] = FOREGROUND
    labels[gray <= BG_LEVEL] = BACKGROUND
    return labels


def labels_to_grayscale(labels: np.ndarray) -> np.ndarray:
    """Encode region labels as 0 (background), 0.5 (unknown), 1 (foreground)."""
    gray = np.full(labels.shape, 0.5, dtype=np.float64)
    gray[labels == FOREGROUND] = 1.0
    gray[labels == BACKGROUND] = 0.0
    return gray


def load_trimap(path: str | Path) -> np.ndarray:
    """Load a trimap image and decode it into region labels."""
    return labels_from_grayscale(load_grayscale(path))
