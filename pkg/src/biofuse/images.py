"""Grayscale image samples and file decoding (PGM P5, PNG).

All pixel data is kept as float64 matrices with intensities in [0, 1];
8-bit inputs are mapped to v/255 exactly. Color inputs are reduced to
luminance with the ITU-R BT.601 weights. Resampling uses bilinear
interpolation on half-pixel centers so resized fixtures are byte-stable
across platforms.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

# ITU-R BT.601 luminance weights.
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 0.114

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class Modality(str, Enum):
    """Biometric capture channel."""

    FACE = "face"
    EAR = "ear"


@dataclass(frozen=True)
class ImageSample:
    """A grayscale pixel matrix tagged with modality and subject label.

    `pixels` is a (height, width) float64 array. Samples produced by the
    loaders always lie in [0, 1]; subspace reconstructions may exceed that
    range and are clamped only on export (see :meth:`clamped`).
    """

    pixels: np.ndarray
    modality: Modality
    subject_id: str | None = None

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def validate(self) -> "ImageSample":
        """Check the ingestion invariants: 2-D, nonempty, all values in [0, 1]."""
        if self.pixels.ndim != 2:
            raise ValueError(f"pixels must be a 2-D matrix, got ndim={self.pixels.ndim}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        lo = float(self.pixels.min())
        hi = float(self.pixels.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"intensities outside [0, 1]: min={lo}, max={hi}")
        return self

    def clamped(self) -> "ImageSample":
        """Copy with intensities clipped to [0, 1], for export only."""
        return ImageSample(np.clip(self.pixels, 0.0, 1.0), self.modality, self.subject_id)

    def flatten(self) -> np.ndarray:
        """Row-major flattening used throughout the eigenspace machinery."""
        return self.pixels.reshape(-1)


def make_sample(
    pixels: np.ndarray, modality: Modality, subject_id: str | None = None
) -> ImageSample:
    """Build a validated ImageSample from raw array data."""
    arr = np.asarray(pixels, dtype=np.float64)
    return ImageSample(arr, modality, subject_id).validate()


def luminance(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (h, w, 3) float array, same scale as the input."""
    return LUMA_R * rgb[..., 0] + LUMA_G * rgb[..., 1] + LUMA_B * rgb[..., 2]


def bilinear_resize(pixels: np.ndarray, target_width: int, target_height: int) -> np.ndarray:
    """Resize a 2-D matrix by bilinear interpolation.

    Sample positions use the half-pixel-center convention
    ``src = (dst + 0.5) * (in_size / out_size) - 0.5`` with clamping at the
    borders, so shrinking and enlarging are both well defined and the exact
    kernel is reproducible.
    """
    if target_width <= 0 or target_height <= 0:
        raise ValueError("target dimensions must be positive")
    in_h, in_w = pixels.shape
    if (in_w, in_h) == (target_width, target_height):
        return pixels.copy()

    x = (np.arange(target_width) + 0.5) * (in_w / target_width) - 0.5
    y = (np.arange(target_height) + 0.5) * (in_h / target_height) - 0.5
    x = np.clip(x, 0.0, in_w - 1.0)
    y = np.clip(y, 0.0, in_h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    fx = x - x0
    fy = y - y0

    top = pixels[np.ix_(y0, x0)] * (1.0 - fx) + pixels[np.ix_(y0, x1)] * fx
    bottom = pixels[np.ix_(y1, x0)] * (1.0 - fx) + pixels[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy)[:, None] + bottom * fy[:, None]


def _read_pgm(data: bytes, path: Path) -> np.ndarray:
    """Decode a binary 8-bit PGM (P5, maxval 255) into a float64 [0,1] matrix."""
    stream = io.BytesIO(data)

    def next_token() -> bytes:
        tok = b""
        while True:
            c = stream.read(1)
            if not c:
                raise ValueError(f"{path}: truncated PGM header")
            if c == b"#":  # comment runs to end of line
                while c and c not in b"\r\n":
                    c = stream.read(1)
                continue
            if c.isspace():
                if tok:
                    return tok
                continue
            tok += c

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width = int(next_token())
    height = int(next_token())
    maxval = int(next_token())
    if width <= 0 or height <= 0:
        raise ValueError(f"{path}: invalid PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM with maxval 255 is supported, got {maxval}")
    raw = stream.read(width * height)
    if len(raw) < width * height:
        raise ValueError(f"{path}: truncated PGM pixel data")
    values = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return values.astype(np.float64) / 255.0


def _read_png(path: Path) -> np.ndarray:
    """Decode a PNG into a float64 [0,1] grayscale matrix."""
    with Image.open(path) as im:
        im.load()
        mode = im.mode
        if mode in ("1", "L"):
            gray = im.convert("L") if mode == "1" else im
            return np.asarray(gray, dtype=np.float64) / 255.0
        if mode in ("LA", "P", "RGB", "RGBA"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            return luminance(rgb) / 255.0
        raise ValueError(f"{path}: unsupported PNG mode {mode!r}")


def load_image(
    path: str | Path,
    target_width: int,
    target_height: int,
    modality: Modality,
    subject_id: str | None = None,
) -> ImageSample:
    """Load a PGM (P5, 8-bit) or PNG file as a normalized grayscale sample.

    The file type is detected from its magic bytes, not the extension.
    Images that do not already match (target_width, target_height) are
    resized with :func:`bilinear_resize`.
    """
    p = Path(path)
    if target_width <= 0 or target_height <= 0:
        raise ValueError("target dimensions must be positive")
    data = p.read_bytes()
    if data[:2] == b"P5":
        pixels = _read_pgm(data, p)
    elif data[: len(PNG_SIGNATURE)] == PNG_SIGNATURE:
        pixels = _read_png(p)
    else:
        raise ValueError(f"{p}: unsupported image format (expected PGM P5 or PNG)")
    if pixels.shape != (target_height, target_width):
        pixels = bilinear_resize(pixels, target_width, target_height)
    return ImageSample(pixels, modality, subject_id).validate()


def write_pgm(path: str | Path, values: np.ndarray) -> None:
    """Write a uint8 matrix as a binary PGM (P5, maxval 255)."""
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        raise ValueError("write_pgm expects uint8 pixel values")
    if arr.ndim != 2:
        raise ValueError("write_pgm expects a 2-D matrix")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())
