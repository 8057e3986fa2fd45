"""Image representation and the pixel-level primitives everything else uses.

Pixels live as float64 RGB on a unit scale; 8-bit quantization happens only
at file boundaries, with round-half-up so golden files are byte-stable.
Supported formats are PNG (via Pillow) and PPM P3/P6 (own reader/writer, so
text fixtures need no codec).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import BoundsError, IOFailure, ValidationError

DEFAULT_CROP_SIDE = 224


class ImageBuffer:
    """Immutable RGB raster with unit-scale float channels.

    The backing array has shape (height, width, 3), dtype float64, every
    value in [0, 1].  The array is copied on construction and marked
    read-only, so buffers are safe to share between threads.
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValidationError(
                f"expected (height, width, 3) pixel array, got shape {arr.shape}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError("image dimensions must be at least 1x1")
        if not np.isfinite(arr).all():
            raise ValidationError("pixel values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError("pixel values must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        self._pixels = arr

    @property
    def pixels(self) -> np.ndarray:
        """Read-only (height, width, 3) float64 view."""
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self._pixels.shape == other._pixels.shape and bool(
            np.array_equal(self._pixels, other._pixels)
        )

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height})"


@dataclass(frozen=True)
class CropWindow:
    """Axis-aligned square window in pixel coordinates."""

    origin_x: int
    origin_y: int
    side: int = DEFAULT_CROP_SIDE

    def __post_init__(self):
        if self.side < 1:
            raise ValidationError(f"crop side must be positive, got {self.side}")
        if self.origin_x < 0 or self.origin_y < 0:
            raise BoundsError(
                f"crop origin must be nonnegative, got ({self.origin_x}, {self.origin_y})"
            )

    def check_within(self, width: int, height: int) -> None:
        if self.origin_x + self.side > width or self.origin_y + self.side > height:
            raise BoundsError(
                f"window {self.side}x{self.side} at ({self.origin_x}, {self.origin_y}) "
                f"exceeds image {width}x{height}"
            )


def quantize_to_bytes(img: ImageBuffer) -> np.ndarray:
    """Unit-scale floats to uint8 with round-half-up (0.5 -> 128)."""
    return np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8)


def load_image(path: str | Path) -> ImageBuffer:
    """Decode a PNG or PPM (P3/P6) file into an ImageBuffer.

    8-bit channel values are divided by 255 onto the unit scale.
    Raises IOFailure with the offending path on any decode problem.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IOFailure(f"cannot read image file {path}: {exc}") from exc
    if raw[:2] in (b"P3", b"P6"):
        bytes_ = _decode_ppm(raw, path)
    else:
        try:
            with Image.open(path) as im:
                bytes_ = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except (UnidentifiedImageError, OSError, SyntaxError) as exc:
            raise IOFailure(f"cannot decode image file {path}: {exc}") from exc
    if bytes_.size == 0:
        raise IOFailure(f"image file {path} has a zero dimension")
    return ImageBuffer(bytes_.astype(np.float64) / 255.0)


def save_image(img: ImageBuffer, path: str | Path) -> None:
    """Write as PNG or binary PPM depending on extension.

    Quantizes round-half-up to 8 bits; load(save(img)) reproduces those
    bytes exactly.
    """
    path = Path(path)
    data = quantize_to_bytes(img)
    suffix = path.suffix.lower()
    try:
        if suffix == ".png":
            Image.fromarray(data, mode="RGB").save(path, format="PNG")
        elif suffix in (".ppm", ".pnm"):
            header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
            path.write_bytes(header + data.tobytes())
        else:
            raise IOFailure(f"unsupported image extension {suffix!r} for {path}")
    except OSError as exc:
        raise IOFailure(f"cannot write image file {path}: {exc}") from exc


def crop(img: ImageBuffer, window: CropWindow) -> ImageBuffer:
    """Extract the square sub-image under `window`.

    Output pixel (x, y) equals input pixel (origin_x + x, origin_y + y).
    """
    window.check_within(img.width, img.height)
    x0, y0, side = window.origin_x, window.origin_y, window.side
    return ImageBuffer(img.pixels[y0 : y0 + side, x0 : x0 + side])


_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def _decode_ppm(raw: bytes, path: Path) -> np.ndarray:
    """Parse P3 (ASCII) or P6 (binary) PPM with maxval 255."""
    magic = raw[:2]
    pos = 2
    fields = []
    while len(fields) < 3:
        m = _PPM_TOKEN.match(raw, pos)
        if not m:
            raise IOFailure(f"truncated PPM header in {path}")
        fields.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise IOFailure(f"malformed PPM header in {path}: {exc}") from exc
    if width < 1 or height < 1:
        raise IOFailure(f"image file {path} has a zero dimension")
    if maxval != 255:
        raise IOFailure(f"unsupported PPM maxval {maxval} in {path} (need 255)")
    count = width * height * 3
    if magic == b"P6":
        # Exactly one whitespace byte separates maxval from pixel data.
        pixel_bytes = raw[pos + 1 : pos + 1 + count]
        if len(pixel_bytes) < count:
            raise IOFailure(f"truncated PPM pixel data in {path}")
        flat = np.frombuffer(pixel_bytes, dtype=np.uint8)
    else:
        tokens = raw[pos:].split()
        if len(tokens) < count:
            raise IOFailure(f"truncated PPM pixel data in {path}")
        try:
            values = [int(t) for t in tokens[:count]]
        except ValueError as exc:
            raise IOFailure(f"malformed PPM pixel data in {path}: {exc}") from exc
        if any(v < 0 or v > 255 for v in values):
            raise IOFailure(f"PPM sample out of range in {path}")
        flat = np.asarray(values, dtype=np.uint8)
    return flat.reshape(height, width, 3)
