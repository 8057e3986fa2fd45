"""Synthetic distortion bank: 19 kinds x 5 severity levels.

Every kind is a pure function of (image, spec): stochastic kinds draw from
a counter-based Philox generator keyed by the spec seed, so repeated calls
are bit-identical and parallel execution cannot perturb outputs.  The
per-level parameter table below is frozen as part of the artifact; severity
ordering is pinned by monotonicity tests (noise variance up, blur gradient
energy down, brighten/darken luminance direction, and so on).  Outputs keep
the input dimensions and are clamped to [0, 1].
"""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .errors import ValidationError
from .imaging import ImageBuffer
from .seeding import derive_seed

LEVELS = (1, 2, 3, 4, 5)


class DistortionType(enum.Enum):
    """The 19 synthetic distortion kinds, in taxonomy order."""

    BLUR = "blur"
    MOTION_BLUR = "motion_blur"
    COLOR_DIFFUSION = "color_diffusion"
    COLOR_CHANGE = "color_change"
    JPEG_COMPRESSION = "jpeg_compression"
    JPEG2000_COMPRESSION = "jpeg2000_compression"
    NOISE = "noise"
    IMPULSE_NOISE = "impulse_noise"
    DARKEN = "darken"
    BRIGHTEN = "brighten"
    JITTER_DISTORTION = "jitter_distortion"
    PIXELATE_DISTORTION = "pixelate_distortion"
    NON_ECCENTRICITY_PATCH = "non_eccentricity_patch"
    QUANTIZATION_DISTORTION = "quantization_distortion"
    DENOISING_RELATED = "denoising_related"
    COLOR_BLOCKS = "color_blocks"
    SHARPNESS = "sharpness"
    CONTRAST = "contrast"
    UNCOMFORTABLE_LUMINANCE_CHANGE = "uncomfortable_luminance_change"


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion kind at a severity level, with a seed for the
    stochastic kinds.  Same (kind, level, seed, input) -> same output."""

    kind: DistortionType
    level: int
    seed: int = 0

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValidationError(f"severity level must be 1..5, got {self.level}")


# Frozen per-level parameters, one row per kind, level 1 -> index 0.
# These values are artifact constants: the taxonomy requires ordinal
# severity, and the monotonicity test suite pins the ordering.
PARAMETER_TABLE: dict[DistortionType, dict[str, tuple]] = {
    DistortionType.BLUR: {"sigma": (1.0, 2.0, 3.0, 4.0, 5.0)},
    DistortionType.MOTION_BLUR: {"length": (5, 9, 13, 17, 21)},
    DistortionType.COLOR_DIFFUSION: {"chroma_sigma": (2.0, 4.0, 6.0, 9.0, 12.0)},
    DistortionType.COLOR_CHANGE: {"hue_degrees": (18.0, 36.0, 54.0, 72.0, 90.0)},
    DistortionType.JPEG_COMPRESSION: {"quality": (50, 30, 18, 10, 5)},
    DistortionType.JPEG2000_COMPRESSION: {
        "keep_fraction": (0.12, 0.06, 0.03, 0.015, 0.008)
    },
    DistortionType.NOISE: {"sigma": (0.02, 0.05, 0.09, 0.14, 0.20)},
    DistortionType.IMPULSE_NOISE: {"flip_prob": (0.01, 0.03, 0.07, 0.12, 0.18)},
    DistortionType.DARKEN: {
        "gamma": (1.3, 1.7, 2.2, 2.9, 3.7),
        "floor_shift": (0.02, 0.04, 0.06, 0.08, 0.10),
    },
    DistortionType.BRIGHTEN: {
        "gamma": (1.3, 1.7, 2.2, 2.9, 3.7),
        "ceil_shift": (0.02, 0.04, 0.06, 0.08, 0.10),
    },
    DistortionType.JITTER_DISTORTION: {"max_shift": (1, 2, 3, 4, 5)},
    DistortionType.PIXELATE_DISTORTION: {"block": (2, 4, 6, 9, 13)},
    DistortionType.NON_ECCENTRICITY_PATCH: {
        "patches": (8, 16, 24, 32, 40),
        "patch_size": (8, 8, 8, 8, 8),
        "max_offset": (8, 8, 8, 8, 8),
    },
    DistortionType.QUANTIZATION_DISTORTION: {"levels": (24, 14, 9, 6, 4)},
    DistortionType.DENOISING_RELATED: {
        "noise_sigma": (0.04, 0.04, 0.04, 0.04, 0.04),
        "smooth_sigma": (0.8, 1.2, 1.7, 2.3, 3.0),
    },
    DistortionType.COLOR_BLOCKS: {"blocks": (2, 4, 6, 9, 12)},
    DistortionType.SHARPNESS: {"amount": (1.0, 2.0, 3.5, 5.5, 8.0)},
    DistortionType.CONTRAST: {"steepness": (5.6, 7.0, 9.0, 12.0, 16.0)},
    DistortionType.UNCOMFORTABLE_LUMINANCE_CHANGE: {
        "amplitude": (0.08, 0.16, 0.24, 0.32, 0.40)
    },
}

# Kinds whose kernels / block transforms need some spatial extent.
_KERNEL_KINDS = frozenset(
    {
        DistortionType.BLUR,
        DistortionType.MOTION_BLUR,
        DistortionType.COLOR_DIFFUSION,
        DistortionType.JPEG_COMPRESSION,
        DistortionType.JPEG2000_COMPRESSION,
        DistortionType.PIXELATE_DISTORTION,
        DistortionType.NON_ECCENTRICITY_PATCH,
        DistortionType.DENOISING_RELATED,
        DistortionType.COLOR_BLOCKS,
        DistortionType.SHARPNESS,
    }
)

STOCHASTIC_KINDS = frozenset(
    {
        DistortionType.NOISE,
        DistortionType.IMPULSE_NOISE,
        DistortionType.JITTER_DISTORTION,
        DistortionType.NON_ECCENTRICITY_PATCH,
        DistortionType.DENOISING_RELATED,
        DistortionType.COLOR_BLOCKS,
    }
)


def distortion_parameters(kind: DistortionType, level: int) -> dict[str, float | int]:
    """Look up the frozen parameter row for (kind, level)."""
    if level not in LEVELS:
        raise ValidationError(f"severity level must be 1..5, got {level}")
    return {name: values[level - 1] for name, values in PARAMETER_TABLE[kind].items()}


def apply_distortion(img: ImageBuffer, spec: DistortionSpec) -> ImageBuffer:
    """Apply one synthetic distortion; dimensions are preserved."""
    if spec.kind in _KERNEL_KINDS and min(img.width, img.height) < 8:
        raise ValidationError(
            f"{spec.kind.value} needs at least 8x8 pixels, got "
            f"{img.width}x{img.height}"
        )
    params = distortion_parameters(spec.kind, spec.level)
    rng = None
    if spec.kind in STOCHASTIC_KINDS:
        rng = np.random.Generator(
            np.random.Philox(key=derive_seed(spec.seed, spec.kind.value))
        )
    out = _APPLIERS[spec.kind](img.pixels, params, rng)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


# --- per-kind procedures -------------------------------------------------


def _gaussian_rgb(px: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(px, sigma=(sigma, sigma, 0), mode="reflect")


def _blur(px, params, rng):
    return _gaussian_rgb(px, params["sigma"])


def _motion_blur(px, params, rng):
    length = int(params["length"])
    kernel = np.eye(length)[::-1] / length  # 45-degree line
    out = np.empty_like(px)
    for c in range(3):
        out[..., c] = ndimage.convolve(px[..., c], kernel, mode="reflect")
    return out


def _color_diffusion(px, params, rng):
    sigma = params["chroma_sigma"]
    y = px @ np.array([0.299, 0.587, 0.114])
    cb = px[..., 2] - y
    cr = px[..., 0] - y
    cb = ndimage.gaussian_filter(cb, sigma=sigma, mode="reflect")
    cr = ndimage.gaussian_filter(cr, sigma=sigma, mode="reflect")
    r = y + cr
    b = y + cb
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.stack([r, g, b], axis=-1)


def _hue_rotation_matrix(degrees: float) -> np.ndarray:
    # Rotation of RGB space about the gray axis.
    theta = math.radians(degrees)
    cos_a, sin_a = math.cos(theta), math.sin(theta)
    third = (1.0 - cos_a) / 3.0
    s = math.sqrt(1.0 / 3.0) * sin_a
    return np.array(
        [
            [cos_a + third, third - s, third + s],
            [third + s, cos_a + third, third - s],
            [third - s, third + s, cos_a + third],
        ]
    )


def _color_change(px, params, rng):
    return px @ _hue_rotation_matrix(params["hue_degrees"]).T


# Standard luminance quantization base table used by the block-DCT
# emulation of JPEG (applied to all three channels).
_JPEG_BASE_QUANT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _jpeg_quant_matrix(quality: int) -> np.ndarray:
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((_JPEG_BASE_QUANT * scale + 50.0) / 100.0), 1.0, 255.0)


def _pad_to_multiple(chan: np.ndarray, multiple: int) -> tuple[np.ndarray, int, int]:
    h, w = chan.shape
    ph = (-h) % multiple
    pw = (-w) % multiple
    return np.pad(chan, ((0, ph), (0, pw)), mode="edge"), h, w


def _jpeg_quantized_channel(chan: np.ndarray, qmat: np.ndarray) -> np.ndarray:
    """Quantized block-DCT coefficient multipliers of one byte-scale channel."""
    blocks = chan.reshape(chan.shape[0] // 8, 8, chan.shape[1] // 8, 8)
    blocks = blocks.transpose(0, 2, 1, 3)
    coeffs = dctn(blocks, type=2, norm="ortho", axes=(2, 3))
    return np.round(coeffs / qmat)


def _jpeg_compression(px, params, rng):
    qmat = _jpeg_quant_matrix(int(params["quality"]))
    out = np.empty_like(px)
    for c in range(3):
        chan, h, w = _pad_to_multiple(px[..., c] * 255.0, 8)
        quantized = _jpeg_quantized_channel(chan, qmat) * qmat
        blocks = idctn(quantized, type=2, norm="ortho", axes=(2, 3))
        chan = blocks.transpose(0, 2, 1, 3).reshape(chan.shape)
        out[..., c] = chan[:h, :w] / 255.0
    return out


def jpeg_payload_size(img: ImageBuffer, level: int) -> int:
    """Compressed size in bytes of the emulated JPEG coefficient payload.

    The emulation has no entropy coder, so "file size at matched settings"
    means the deflate-compressed quantized coefficient stream, which is
    what a real codec would entropy-code.  Nonincreasing in level.
    """
    qmat = _jpeg_quant_matrix(int(distortion_parameters(
        DistortionType.JPEG_COMPRESSION, level)["quality"]))
    streams = []
    for c in range(3):
        chan, _, _ = _pad_to_multiple(img.pixels[..., c] * 255.0, 8)
        streams.append(_jpeg_quantized_channel(chan, qmat).astype(np.int32).tobytes())
    return len(zlib.compress(b"".join(streams), 6))


_SQRT2 = math.sqrt(2.0)


def _haar_fwd_axis(a: np.ndarray, axis: int) -> np.ndarray:
    s = np.moveaxis(a, axis, 0)
    lo = (s[0::2] + s[1::2]) / _SQRT2
    hi = (s[0::2] - s[1::2]) / _SQRT2
    return np.moveaxis(np.concatenate([lo, hi], axis=0), 0, axis)


def _haar_inv_axis(a: np.ndarray, axis: int) -> np.ndarray:
    s = np.moveaxis(a, axis, 0)
    n = s.shape[0] // 2
    lo, hi = s[:n], s[n:]
    out = np.empty_like(s)
    out[0::2] = (lo + hi) / _SQRT2
    out[1::2] = (lo - hi) / _SQRT2
    return np.moveaxis(out, 0, axis)


_WAVELET_LEVELS = 3


def _haar2(chan: np.ndarray, inverse: bool) -> np.ndarray:
    out = chan.copy()
    dims = [(chan.shape[0] >> k, chan.shape[1] >> k) for k in range(_WAVELET_LEVELS)]
    for h, w in reversed(dims) if inverse else dims:
        sub = out[:h, :w]
        if inverse:
            sub = _haar_inv_axis(_haar_inv_axis(sub, 0), 1)
        else:
            sub = _haar_fwd_axis(_haar_fwd_axis(sub, 0), 1)
        out[:h, :w] = sub
    return out


def _jpeg2000_compression(px, params, rng):
    keep = params["keep_fraction"]
    out = np.empty_like(px)
    for c in range(3):
        chan, h, w = _pad_to_multiple(px[..., c], 1 << _WAVELET_LEVELS)
        coeffs = _haar2(chan, inverse=False)
        magnitudes = np.abs(coeffs).ravel()
        kept = max(1, int(round(keep * magnitudes.size)))
        threshold = np.partition(magnitudes, magnitudes.size - kept)[
            magnitudes.size - kept
        ]
        coeffs = np.where(np.abs(coeffs) >= threshold, coeffs, 0.0)
        out[..., c] = _haar2(coeffs, inverse=True)[:h, :w]
    return out


def _noise(px, params, rng):
    return px + rng.standard_normal(px.shape) * params["sigma"]


def _impulse_noise(px, params, rng):
    p = params["flip_prob"]
    u = rng.random(px.shape[:2])
    out = px.copy()
    out[u < p / 2.0] = 0.0
    out[u > 1.0 - p / 2.0] = 1.0
    return out


def _darken(px, params, rng):
    return (1.0 - params["floor_shift"]) * px ** params["gamma"]


def _brighten(px, params, rng):
    shift = params["ceil_shift"]
    return (1.0 - shift) * px ** (1.0 / params["gamma"]) + shift


def _jitter(px, params, rng):
    d = int(params["max_shift"])
    h, w = px.shape[:2]
    dy = rng.integers(-d, d + 1, size=(h, w))
    dx = rng.integers(-d, d + 1, size=(h, w))
    yy, xx = np.mgrid[0:h, 0:w]
    src_y = np.clip(yy + dy, 0, h - 1)
    src_x = np.clip(xx + dx, 0, w - 1)
    return px[src_y, src_x]


def _pixelate(px, params, rng):
    block = int(params["block"])
    h, w = px.shape[:2]
    ph, pw = h + (-h) % block, w + (-w) % block
    padded = np.pad(px, ((0, ph - h), (0, pw - w), (0, 0)), mode="edge")
    grid = padded.reshape(ph // block, block, pw // block, block, 3)
    means = grid.mean(axis=(1, 3))
    return np.repeat(np.repeat(means, block, axis=0), block, axis=1)[:h, :w]


def _non_eccentricity_patch(px, params, rng):
    size = int(params["patch_size"])
    offset = int(params["max_offset"])
    count = int(params["patches"])
    h, w = px.shape[:2]
    out = px.copy()
    for _ in range(count):
        dst_y = int(rng.integers(0, h - size + 1))
        dst_x = int(rng.integers(0, w - size + 1))
        src_y = int(np.clip(dst_y + rng.integers(-offset, offset + 1), 0, h - size))
        src_x = int(np.clip(dst_x + rng.integers(-offset, offset + 1), 0, w - size))
        out[dst_y : dst_y + size, dst_x : dst_x + size] = px[
            src_y : src_y + size, src_x : src_x + size
        ]
    return out


def _quantization(px, params, rng):
    n = int(params["levels"])
    return np.round(px * (n - 1)) / (n - 1)


def _denoising_related(px, params, rng):
    noisy = px + rng.standard_normal(px.shape) * params["noise_sigma"]
    return _gaussian_rgb(np.clip(noisy, 0.0, 1.0), params["smooth_sigma"])


def _color_blocks(px, params, rng):
    count = int(params["blocks"])
    h, w = px.shape[:2]
    side = max(4, round(0.125 * min(h, w)))
    out = px.copy()
    for _ in range(count):
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        out[y : y + side, x : x + side] = rng.random(3)
    return out


def _sharpness(px, params, rng):
    blurred = _gaussian_rgb(px, 1.5)
    return px + params["amount"] * (px - blurred)


def _contrast(px, params, rng):
    k = params["steepness"]

    def logistic(v):
        return 1.0 / (1.0 + np.exp(-k * (v - 0.5)))

    lo, hi = logistic(0.0), logistic(1.0)
    return (logistic(px) - lo) / (hi - lo)


def _uncomfortable_luminance(px, params, rng):
    w = px.shape[1]
    x = np.arange(w, dtype=np.float64)
    gain = 1.0 + params["amplitude"] * np.sin(2.0 * math.pi * 2.0 * x / w)
    return px * gain[np.newaxis, :, np.newaxis]


_APPLIERS = {
    DistortionType.BLUR: _blur,
    DistortionType.MOTION_BLUR: _motion_blur,
    DistortionType.COLOR_DIFFUSION: _color_diffusion,
    DistortionType.COLOR_CHANGE: _color_change,
    DistortionType.JPEG_COMPRESSION: _jpeg_compression,
    DistortionType.JPEG2000_COMPRESSION: _jpeg2000_compression,
    DistortionType.NOISE: _noise,
    DistortionType.IMPULSE_NOISE: _impulse_noise,
    DistortionType.DARKEN: _darken,
    DistortionType.BRIGHTEN: _brighten,
    DistortionType.JITTER_DISTORTION: _jitter,
    DistortionType.PIXELATE_DISTORTION: _pixelate,
    DistortionType.NON_ECCENTRICITY_PATCH: _non_eccentricity_patch,
    DistortionType.QUANTIZATION_DISTORTION: _quantization,
    DistortionType.DENOISING_RELATED: _denoising_related,
    DistortionType.COLOR_BLOCKS: _color_blocks,
    DistortionType.SHARPNESS: _sharpness,
    DistortionType.CONTRAST: _contrast,
    DistortionType.UNCOMFORTABLE_LUMINANCE_CHANGE: _uncomfortable_luminance,
}
