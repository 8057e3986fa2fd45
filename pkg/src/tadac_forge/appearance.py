"""Appearance measurement: brightness, contrast, sharpness, colorfulness.

Each metric is a pure scalar function of an ImageBuffer.  Raw values are
normalized by fixed analytic constants (no corpus statistics), then binned
into low/medium/high with half-open intervals whose thresholds are part of
the pipeline contract.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .imaging import ImageBuffer

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class Level(enum.Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class MetricKind(enum.Enum):
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    SHARPNESS = "sharpness"
    COLORFULNESS = "colorfulness"


# (low/medium, medium/high) bin edges on normalized values.  A value equal
# to an edge belongs to the upper bin.
BIN_THRESHOLDS: dict[MetricKind, tuple[float, float]] = {
    MetricKind.BRIGHTNESS: (0.40, 0.55),
    MetricKind.CONTRAST: (0.40, 0.60),
    MetricKind.SHARPNESS: (0.10, 0.21),
    MetricKind.COLORFULNESS: (0.15, 0.25),
}

# Raw-to-normalized divisors.  Brightness is already unit-scale; contrast's
# analytic maximum is 0.5 (half mass at 0, half at 1); the sharpness proxy
# peaks at 1.0 on a 0/1 checkerboard; colorfulness uses a fixed 1.1 upper
# envelope of the unit-scale opponent-axis metric, clamped after division.
NORMALIZERS: dict[MetricKind, float] = {
    MetricKind.BRIGHTNESS: 1.0,
    MetricKind.CONTRAST: 0.5,
    MetricKind.SHARPNESS: 1.0,
    MetricKind.COLORFULNESS: 1.1,
}


def luma(img: ImageBuffer) -> np.ndarray:
    """Per-pixel brightness: 0.299 r + 0.587 g + 0.114 b."""
    return img.pixels @ LUMA_WEIGHTS


def brightness(img: ImageBuffer) -> float:
    """Mean per-pixel brightness, in [0, 1]."""
    return float(luma(img).mean())


def contrast(img: ImageBuffer) -> float:
    """Population standard deviation of per-pixel brightness, in [0, 0.5]."""
    return float(luma(img).std())


def sharpness(img: ImageBuffer) -> float:
    """Mean magnitude of horizontal and vertical brightness differences.

    Pooled over all adjacent pixel pairs; 0 for a constant image, 1 for a
    maximal-frequency 0/1 checkerboard.  Requires both dimensions >= 2.
    """
    if img.width < 2 or img.height < 2:
        raise ValidationError(
            f"sharpness needs at least 2x2 pixels, got {img.width}x{img.height}"
        )
    br = luma(img)
    dx = np.abs(np.diff(br, axis=1))
    dy = np.abs(np.diff(br, axis=0))
    return float((dx.sum() + dy.sum()) / (dx.size + dy.size))


def colorfulness(img: ImageBuffer) -> float:
    """Opponent-axis colorfulness (Hasler-Suesstrunk form) on unit channels.

    With rg = r - g and yb = (r + g)/2 - b:
    sqrt(sigma_rg^2 + sigma_yb^2) + 0.3 sqrt(mu_rg^2 + mu_yb^2).
    Exactly 0 for any grayscale image.
    """
    px = img.pixels
    rg = px[..., 0] - px[..., 1]
    yb = 0.5 * (px[..., 0] + px[..., 1]) - px[..., 2]
    sigma = math.hypot(float(rg.std()), float(yb.std()))
    mu = math.hypot(float(rg.mean()), float(yb.mean()))
    return sigma + 0.3 * mu


def bin_level(metric: MetricKind, norm_value: float) -> Level:
    """Bin a normalized value: [0, a) low, [a, b) medium, [b, 1] high."""
    if not 0.0 <= norm_value <= 1.0:
        raise ValidationError(
            f"normalized {metric.value} must be in [0, 1], got {norm_value}"
        )
    low_edge, high_edge = BIN_THRESHOLDS[metric]
    if norm_value < low_edge:
        return Level.LOW
    if norm_value < high_edge:
        return Level.MEDIUM
    return Level.HIGH


@dataclass(frozen=True)
class AppearanceProfile:
    """Raw, normalized, and binned values of the four appearance metrics."""

    br_raw: float
    ct_raw: float
    sh_raw: float
    cl_raw: float
    br_norm: float
    ct_norm: float
    sh_norm: float
    cl_norm: float
    br_level: Level
    ct_level: Level
    sh_level: Level
    cl_level: Level

    def norm(self, metric: MetricKind) -> float:
        return getattr(self, f"{_SHORT[metric]}_norm")

    def level(self, metric: MetricKind) -> Level:
        return getattr(self, f"{_SHORT[metric]}_level")


_SHORT = {
    MetricKind.BRIGHTNESS: "br",
    MetricKind.CONTRAST: "ct",
    MetricKind.SHARPNESS: "sh",
    MetricKind.COLORFULNESS: "cl",
}


def normalize(metric: MetricKind, raw: float) -> float:
    """Divide by the metric's fixed constant and clamp into [0, 1]."""
    return min(max(raw / NORMALIZERS[metric], 0.0), 1.0)


def profile(img: ImageBuffer) -> AppearanceProfile:
    """Measure, normalize, and bin all four appearance metrics."""
    raws = {
        MetricKind.BRIGHTNESS: brightness(img),
        MetricKind.CONTRAST: contrast(img),
        MetricKind.SHARPNESS: sharpness(img),
        MetricKind.COLORFULNESS: colorfulness(img),
    }
    norms = {m: normalize(m, raw) for m, raw in raws.items()}
    levels = {m: bin_level(m, v) for m, v in norms.items()}
    return AppearanceProfile(
        br_raw=raws[MetricKind.BRIGHTNESS],
        ct_raw=raws[MetricKind.CONTRAST],
        sh_raw=raws[MetricKind.SHARPNESS],
        cl_raw=raws[MetricKind.COLORFULNESS],
        br_norm=norms[MetricKind.BRIGHTNESS],
        ct_norm=norms[MetricKind.CONTRAST],
        sh_norm=norms[MetricKind.SHARPNESS],
        cl_norm=norms[MetricKind.COLORFULNESS],
        br_level=levels[MetricKind.BRIGHTNESS],
        ct_level=levels[MetricKind.CONTRAST],
        sh_level=levels[MetricKind.SHARPNESS],
        cl_level=levels[MetricKind.COLORFULNESS],
    )
