"""Crop selection and training-pair manifest construction.

Saliency-max cropping picks the fixed-size window with the largest summed
saliency (exact, via a summed-area table, ties broken row-major).  Positive
image-image pairs are two crops of one image with 10-30% area overlap;
negative pairs cross images.  Positive image-text pairs use a text from the
image's own annotation record; negatives borrow a foreign record's text.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .annotations import AnnotationRecord
from .appearance import luma
from .errors import BoundsError, ValidationError
from .imaging import CropWindow, ImageBuffer
from .seeding import SplitMix64, derive_seed

OVERLAP_RANGE = (0.10, 0.30)
_PROXY_BOX = 15  # side of the local-mean window in the saliency proxy


@dataclass(frozen=True)
class SaliencyMap:
    """Nonnegative per-pixel saliency, same extent as its host image."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"saliency map must be 2-D, got shape {arr.shape}")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise ValidationError("saliency values must be finite and nonnegative")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def saliency_proxy(img: ImageBuffer) -> SaliencyMap:
    """Local brightness-contrast proxy for saliency.

    Per-pixel squared deviation of brightness from its box-filtered local
    mean (15x15 window, reflected edges).  Deterministic, and zero exactly
    on constant images.  A stand-in usable wherever an externally predicted
    map is not supplied.
    """
    br = luma(img)
    local_mean = ndimage.uniform_filter(br, size=_PROXY_BOX, mode="reflect")
    return SaliencyMap((br - local_mean) ** 2)


def saliency_crop(img: ImageBuffer, sal: SaliencyMap, side: int) -> CropWindow:
    """Window of the given side maximizing summed saliency.

    Exact via a summed-area table; among equal sums the smallest origin_y,
    then smallest origin_x wins (row-major first maximum).
    """
    if (sal.height, sal.width) != (img.height, img.width):
        raise ValidationError(
            f"saliency map {sal.width}x{sal.height} does not match "
            f"image {img.width}x{img.height}"
        )
    if side < 1 or side > min(img.width, img.height):
        raise BoundsError(
            f"crop side {side} does not fit image {img.width}x{img.height}"
        )
    sat = np.zeros((sal.height + 1, sal.width + 1))
    np.cumsum(np.cumsum(sal.values, axis=0), axis=1, out=sat[1:, 1:])
    sums = (
        sat[side:, side:]
        - sat[:-side, side:]
        - sat[side:, :-side]
        + sat[:-side, :-side]
    )
    flat_index = int(np.argmax(sums))  # first maximum in row-major order
    origin_y, origin_x = divmod(flat_index, sums.shape[1])
    return CropWindow(origin_x=origin_x, origin_y=origin_y, side=side)


def ola_pair(
    img: ImageBuffer, side: int, seed: int
) -> tuple[CropWindow, CropWindow, float]:
    """Two same-size crops overlapping by a fraction drawn from [0.10, 0.30].

    The second window is the first displaced along one axis by
    d = round(side * (1 - f)); the achieved fraction (side - d)/side is
    returned and differs from the drawn one only by pixel discretization.
    """
    return _ola_windows(img.width, img.height, side, SplitMix64(seed))


def _ola_windows(
    width: int, height: int, side: int, rng: SplitMix64
) -> tuple[CropWindow, CropWindow, float]:
    lo, hi = OVERLAP_RANGE
    min_displacement = round(side * (1.0 - hi))
    # Per axis, the largest feasible displacement bounds the smallest
    # achievable overlap fraction.
    feasible = []
    for axis, extent in (("x", width), ("y", height)):
        if extent - side >= min_displacement and min(width, height) >= side:
            feasible.append((axis, extent))
    if not feasible:
        raise BoundsError(
            f"image {width}x{height} cannot hold two side-{side} crops "
            f"with overlap in [{lo}, {hi}]"
        )
    axis, extent = feasible[rng.randrange(len(feasible))]
    max_displacement = min(extent - side, round(side * (1.0 - lo)))
    fraction_floor = max(lo, 1.0 - max_displacement / side)
    f = rng.uniform(fraction_floor, hi)
    d = round(side * (1.0 - f))
    d = min(max(d, min_displacement), max_displacement)

    if axis == "x":
        anchor_x = rng.randrange(width - side - d + 1)
        anchor_y = rng.randrange(height - side + 1)
        first = CropWindow(anchor_x, anchor_y, side)
        second = CropWindow(anchor_x + d, anchor_y, side)
    else:
        anchor_x = rng.randrange(width - side + 1)
        anchor_y = rng.randrange(height - side - d + 1)
        first = CropWindow(anchor_x, anchor_y, side)
        second = CropWindow(anchor_x, anchor_y + d, side)
    return first, second, (side - d) / side


class PairKind(enum.Enum):
    IMAGE_TEXT = "image_text"
    IMAGE_IMAGE = "image_image"


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class TextRef:
    """Points at one text inside an annotation record."""

    image_id: str
    text_index: int


@dataclass(frozen=True)
class CropRef:
    """Points at a window of one image."""

    image_id: str
    window: Optional[CropWindow] = None


@dataclass(frozen=True)
class PairRecord:
    """One training pair; batch_index groups rows into contrastive batches
    of exactly one positive and batch_size - 1 negatives."""

    kind: PairKind
    polarity: Polarity
    batch_index: int
    left: CropRef
    right: TextRef | CropRef
    overlap_fraction: Optional[float] = None


@dataclass(frozen=True)
class PairingConfig:
    batch_size: int = 8
    crop_side: int = 224
    seed: int = 0
    image_text: bool = True
    image_image: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch size must be >= 1, got {self.batch_size}")
        if self.crop_side < 1:
            raise ValidationError(f"crop side must be >= 1, got {self.crop_side}")


def build_pair_manifest(
    records: Sequence[AnnotationRecord],
    config: PairingConfig,
    text_side_windows: Optional[dict[str, CropWindow]] = None,
) -> list[PairRecord]:
    """Enumerate contrastive batches over a set of annotation records.

    Per record: one image-text batch whose positive is one of the record's
    own texts, and one image-image batch whose positive is an overlapping
    crop pair of the record's image.  Negatives always cross record
    boundaries.  Output ordering is by image id, then batch, so manifests
    are byte-stable regardless of worker scheduling.

    `text_side_windows` optionally maps image ids to the saliency-max crop
    used on the image side of image-text pairs (the window is metadata; it
    never changes which texts pair with which images).
    """
    if not records:
        raise ValidationError("cannot build pairs from an empty record list")
    negatives_needed = config.batch_size - 1
    if negatives_needed > 0 and len(records) < 2:
        raise ValidationError(
            "need at least 2 records to draw negative pairs "
            f"(batch size {config.batch_size})"
        )
    ordered = sorted(records, key=lambda r: r.image_id)
    ids = [r.image_id for r in ordered]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate image ids in pair-manifest input")
    text_side_windows = text_side_windows or {}

    pairs: list[PairRecord] = []
    batch_index = 0
    for position, record in enumerate(ordered):
        others = [r for i, r in enumerate(ordered) if i != position]
        if config.image_text:
            pairs.extend(
                _image_text_batch(
                    record, others, config, batch_index,
                    text_side_windows.get(record.image_id),
                )
            )
            batch_index += 1
        if config.image_image:
            pairs.extend(
                _image_image_batch(record, others, config, batch_index)
            )
            batch_index += 1
    return pairs


def _require_dims(record: AnnotationRecord) -> tuple[int, int]:
    if record.width is None or record.height is None:
        raise ValidationError(
            f"record {record.image_id} lacks image dimensions needed for cropping"
        )
    return record.width, record.height


def _image_text_batch(
    record: AnnotationRecord,
    others: Sequence[AnnotationRecord],
    config: PairingConfig,
    batch_index: int,
    window: Optional[CropWindow],
) -> list[PairRecord]:
    rng = SplitMix64(derive_seed(config.seed, record.image_id, "pair-image-text"))
    out = [
        PairRecord(
            kind=PairKind.IMAGE_TEXT,
            polarity=Polarity.POSITIVE,
            batch_index=batch_index,
            left=CropRef(record.image_id, window),
            right=TextRef(record.image_id, rng.randrange(len(record.texts))),
        )
    ]
    for _ in range(config.batch_size - 1):
        foreign = others[rng.randrange(len(others))]
        out.append(
            PairRecord(
                kind=PairKind.IMAGE_TEXT,
                polarity=Polarity.NEGATIVE,
                batch_index=batch_index,
                left=CropRef(record.image_id, window),
                right=TextRef(foreign.image_id, rng.randrange(len(foreign.texts))),
            )
        )
    return out


def _random_window(width: int, height: int, side: int, rng: SplitMix64) -> CropWindow:
    if side > min(width, height):
        raise BoundsError(f"crop side {side} does not fit image {width}x{height}")
    return CropWindow(
        rng.randrange(width - side + 1), rng.randrange(height - side + 1), side
    )


def _image_image_batch(
    record: AnnotationRecord,
    others: Sequence[AnnotationRecord],
    config: PairingConfig,
    batch_index: int,
) -> list[PairRecord]:
    rng = SplitMix64(derive_seed(config.seed, record.image_id, "pair-image-image"))
    width, height = _require_dims(record)
    first, second, fraction = _ola_windows(width, height, config.crop_side, rng)
    out = [
        PairRecord(
            kind=PairKind.IMAGE_IMAGE,
            polarity=Polarity.POSITIVE,
            batch_index=batch_index,
            left=CropRef(record.image_id, first),
            right=CropRef(record.image_id, second),
            overlap_fraction=fraction,
        )
    ]
    for _ in range(config.batch_size - 1):
        foreign = others[rng.randrange(len(others))]
        fw, fh = _require_dims(foreign)
        out.append(
            PairRecord(
                kind=PairKind.IMAGE_IMAGE,
                polarity=Polarity.NEGATIVE,
                batch_index=batch_index,
                left=CropRef(
                    record.image_id, _random_window(width, height, config.crop_side, rng)
                ),
                right=CropRef(
                    foreign.image_id, _random_window(fw, fh, config.crop_side, rng)
                ),
            )
        )
    return out
