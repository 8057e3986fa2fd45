"""Shared fixtures: deterministic synthetic images used across the suite."""

import numpy as np
import pytest

from tadac_forge.imaging import ImageBuffer

LUMA = np.array([0.299, 0.587, 0.114])


def structured_pixels(width: int = 64, height: int = 64) -> np.ndarray:
    """Formula-based photo-like pattern: smooth waves, gradients everywhere,
    no pixel at the clamp boundaries."""
    x = np.arange(width) / width
    y = np.arange(height) / height
    X, Y = np.meshgrid(x, y)
    r = 0.45 + 0.35 * np.sin(2 * np.pi * X * 3) * np.cos(2 * np.pi * Y * 2)
    g = 0.50 + 0.30 * np.cos(2 * np.pi * (X + Y) * 2.5)
    b = 0.40 + 0.25 * np.sin(2 * np.pi * X * 1.5 + 1.0) + 0.15 * Y
    return np.clip(np.stack([r, g, b], axis=-1), 0.02, 0.98)


@pytest.fixture(scope="session")
def structured_image() -> ImageBuffer:
    """Fixed 64x64 fixture for distortion monotonicity and metric tests."""
    return ImageBuffer(structured_pixels())


@pytest.fixture(scope="session")
def large_image() -> ImageBuffer:
    """384x512 fixture big enough for 224-pixel crops."""
    return ImageBuffer(structured_pixels(width=512, height=384))


def constant_image(value, width: int = 8, height: int = 8) -> ImageBuffer:
    value = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
    return ImageBuffer(np.tile(value, (height, width, 1)))


def gray_image(values_2d) -> ImageBuffer:
    arr = np.asarray(values_2d, dtype=np.float64)
    return ImageBuffer(np.repeat(arr[:, :, np.newaxis], 3, axis=2))


def mean_luma(img: ImageBuffer) -> float:
    return float((img.pixels @ LUMA).mean())


def gradient_energy(img: ImageBuffer) -> float:
    br = img.pixels @ LUMA
    return float((np.diff(br, axis=0) ** 2).sum() + (np.diff(br, axis=1) ** 2).sum())
