"""Image decoding, luma conversion, Sobel complexity maps and integral images.

Color images are ``float64`` arrays of shape ``(H, W, 3)`` with values in
``[0, 1]``; gray images and complexity maps are ``(H, W)`` arrays.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from copyspace.annotations import BoundingBox
from copyspace.errors import ArgumentError, DecodeError

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])
# |gx|, |gy| <= 4 for inputs in [0, 1]
SOBEL_MAX = 4.0 * math.sqrt(2.0)
_GRID_SNAP = 1e-9


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG or JPEG bytes into an RGB float image."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format not in ("PNG", "JPEG"):
                raise DecodeError(f"unsupported image format {im.format!r}")
            im.load()
            rgb = im.convert("RGB")
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from None
    return np.asarray(rgb, dtype=np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def encode_png(img: np.ndarray) -> bytes:
    """Encode a color or gray float image as PNG (linear 8-bit quantization)."""
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise ArgumentError(f"expected a 2-D or 3-D image, got shape {img.shape}")
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def image_size(path) -> tuple[int, int]:
    """(width, height) from the file header without decoding pixels."""
    try:
        with Image.open(path) as im:
            return im.size
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot read image header of {path}: {exc}") from None


def _check_color(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ArgumentError(f"expected an (H, W, 3) color image, got shape {img.shape}")
    return img


def to_luma(img: np.ndarray) -> np.ndarray:
    """Rec. 709 luma, clamped to [0, 1]."""
    img = _check_color(img)
    return np.clip(img @ LUMA_WEIGHTS, 0.0, 1.0)


def as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return to_luma(img) if img.ndim == 3 else img


def complexity_map(gray: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude with edge-replicate padding, scaled into [0, 1]."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ArgumentError(f"expected a 2-D gray image, got shape {gray.shape}")
    h, w = gray.shape
    if h < 3 or w < 3:
        raise ArgumentError(f"image {w}x{h} is smaller than the 3x3 kernel")
    p = np.pad(gray, 1, mode="edge")
    left = p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    right = p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]
    top = p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    bottom = p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]
    gx = right - left
    gy = bottom - top
    return np.clip(np.hypot(gx, gy) / SOBEL_MAX, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area table: ``table[y, x]`` is the sum over ``[0, x) x [0, y)``."""

    table: np.ndarray

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def region_sum(self, x0: int, y0: int, x1: int, y1: int) -> float:
        s = self.table
        return float(s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0])

    def region_sums(self, rects: np.ndarray) -> np.ndarray:
        """Vectorized sums for an ``(N, 4)`` integer array of x0, y0, x1, y1."""
        s = self.table
        x0, y0, x1, y1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
        return s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]


def build_integral(cmap: np.ndarray) -> IntegralImage:
    cmap = np.asarray(cmap, dtype=np.float64)
    if cmap.ndim != 2:
        raise ArgumentError(f"expected a 2-D map, got shape {cmap.shape}")
    table = np.zeros((cmap.shape[0] + 1, cmap.shape[1] + 1))
    np.cumsum(np.cumsum(cmap, axis=0), axis=1, out=table[1:, 1:])
    table.setflags(write=False)
    return IntegralImage(table)


def _snap(v: float, up: bool) -> int:
    r = round(v)
    if abs(v - r) <= _GRID_SNAP:
        return int(r)
    return math.ceil(v) if up else math.floor(v)


def pixel_rect(box: BoundingBox) -> tuple[int, int, int, int]:
    """Round a box outward to the pixel grid (floor the origin, ceil the far corner)."""
    return (_snap(box.x0, False), _snap(box.y0, False), _snap(box.x1, True), _snap(box.y1, True))


def region_mean(integral: IntegralImage, rect: BoundingBox) -> float:
    """Mean map value over ``rect`` after rounding it outward to whole pixels."""
    x0, y0, x1, y1 = pixel_rect(rect)
    if x0 < 0 or y0 < 0 or x1 > integral.width or y1 > integral.height:
        raise ArgumentError(
            f"rect {(x0, y0, x1, y1)} leaves the {integral.width}x{integral.height} map"
        )
    if x1 <= x0 or y1 <= y0:
        raise ArgumentError("empty rectangle after clipping")
    mean = integral.region_sum(x0, y0, x1, y1) / ((x1 - x0) * (y1 - y0))
    # prefix-sum cancellation can leave ~1e-16 excursions
    return min(max(mean, 0.0), 1.0)


def heatmap_png(cmap: np.ndarray) -> bytes:
    """Linear gray rendering of a map with values in [0, 1]."""
    return encode_png(np.asarray(cmap, dtype=np.float64))
