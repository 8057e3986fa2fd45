"""Contrastive loss math as pure float64 numerics.

The core is a temperature-scaled softmax cross-entropy over one positive
key and any number of negatives, with the positive included in the
denominator.  Batch losses sum it over batches, one direction (image as
query) by default; a symmetric variant exists behind a flag.  The analytic
gradient is provided for verification against finite differences, not for
training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_TEMPERATURE = 0.1
DEFAULT_ALPHA = 0.7


def _as_matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D (rows x dim) array")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-D vector")
    if not np.isfinite(arr).all():
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _check_temperature(temperature: float) -> float:
    if not temperature > 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    return float(temperature)


def info_nce(
    query, keys, positive_index: int, temperature: float = DEFAULT_TEMPERATURE
) -> float:
    """Softmax contrastive loss of a query against a key dictionary.

    -log( exp(q.k+ / t) / sum_i exp(q.k_i / t) ), the positive key included
    in the sum.  Max-subtraction keeps the exponentials in range for
    similarity magnitudes far beyond anything embeddings produce.
    """
    q = _as_vector(query, "query")
    k = _as_matrix(keys, "keys")
    if k.shape[1] != q.shape[0]:
        raise ValidationError(
            f"query dim {q.shape[0]} != key dim {k.shape[1]}"
        )
    if not 0 <= positive_index < k.shape[0]:
        raise ValidationError(
            f"positive index {positive_index} out of range for {k.shape[0]} keys"
        )
    t = _check_temperature(temperature)
    sims = k @ q / t
    shift = sims.max()
    log_denom = shift + np.log(np.exp(sims - shift).sum())
    return float(log_denom - sims[positive_index])


def info_nce_grad_query(
    query, keys, positive_index: int, temperature: float = DEFAULT_TEMPERATURE
) -> np.ndarray:
    """Analytic gradient of info_nce with respect to the query:
    (1/t) (sum_i p_i k_i - k+), p the softmax weights."""
    q = _as_vector(query, "query")
    k = _as_matrix(keys, "keys")
    if k.shape[1] != q.shape[0]:
        raise ValidationError(f"query dim {q.shape[0]} != key dim {k.shape[1]}")
    if not 0 <= positive_index < k.shape[0]:
        raise ValidationError(
            f"positive index {positive_index} out of range for {k.shape[0]} keys"
        )
    t = _check_temperature(temperature)
    sims = k @ q / t
    sims -= sims.max()
    p = np.exp(sims)
    p /= p.sum()
    return (p @ k - k[positive_index]) / t


@dataclass(frozen=True)
class PairBatch:
    """Row indices of one contrastive batch and the position (within
    `rows`) of its single positive pair."""

    rows: tuple[int, ...]
    positive: int = 0

    def __post_init__(self):
        if not self.rows:
            raise ValidationError("batch must contain at least one pair")
        if any(row < 0 for row in self.rows):
            raise ValidationError("batch rows must be nonnegative indices")
        if not 0 <= self.positive < len(self.rows):
            raise ValidationError(
                f"positive position {self.positive} out of range "
                f"for batch of {len(self.rows)}"
            )


def consecutive_batches(n_rows: int, batch_size: int) -> list[PairBatch]:
    """Split rows 0..n-1 into consecutive batches, positive first in each."""
    if batch_size < 1:
        raise ValidationError(f"batch size must be >= 1, got {batch_size}")
    if n_rows % batch_size != 0:
        raise ValidationError(
            f"{n_rows} rows do not divide into batches of {batch_size}"
        )
    return [
        PairBatch(rows=tuple(range(start, start + batch_size)))
        for start in range(0, n_rows, batch_size)
    ]


def _batched_loss(
    queries: np.ndarray,
    keys: np.ndarray,
    batches: Sequence[PairBatch],
    temperature: float,
    symmetric: bool,
) -> float:
    total = 0.0
    for batch in batches:
        rows = list(batch.rows)
        if max(rows) >= queries.shape[0]:
            raise ValidationError(f"batch row {max(rows)} out of range")
        q = queries[rows[batch.positive]]
        total += info_nce(q, keys[rows], batch.positive, temperature)
        if symmetric:
            kq = keys[rows[batch.positive]]
            total += info_nce(kq, queries[rows], batch.positive, temperature)
    if symmetric:
        total /= 2.0
    return total


def image_text_batch_loss(
    image_embs,
    text_embs,
    batches: Sequence[PairBatch],
    temperature: float = DEFAULT_TEMPERATURE,
    symmetric: bool = False,
) -> float:
    """Sum over batches of info_nce with the positive pair's image
    embedding as query and the batch's text embeddings as keys."""
    img = _as_matrix(image_embs, "image embeddings")
    txt = _as_matrix(text_embs, "text embeddings")
    if img.shape != txt.shape:
        raise ValidationError(
            f"image/text embedding shapes differ: {img.shape} vs {txt.shape}"
        )
    return _batched_loss(img, txt, batches, temperature, symmetric)


def image_image_batch_loss(
    crop_embs_a,
    crop_embs_b,
    batches: Sequence[PairBatch],
    temperature: float = DEFAULT_TEMPERATURE,
    symmetric: bool = False,
) -> float:
    """Same batched loss with two crop-embedding sides of each pair."""
    a = _as_matrix(crop_embs_a, "first crop embeddings")
    b = _as_matrix(crop_embs_b, "second crop embeddings")
    if a.shape != b.shape:
        raise ValidationError(
            f"crop embedding shapes differ: {a.shape} vs {b.shape}"
        )
    return _batched_loss(a, b, batches, temperature, symmetric)


def joint_loss(
    image_text_loss: float, image_image_loss: float, alpha: float = DEFAULT_ALPHA
) -> float:
    """Blend the two branch losses: (1 - alpha) * text + alpha * image."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * image_text_loss + alpha * image_image_loss


def finite_difference_grad_query(
    query, keys, positive_index: int, temperature: float, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of info_nce in the query, for checks."""
    q = _as_vector(query, "query").copy()
    grad = np.empty_like(q)
    for i in range(q.shape[0]):
        orig = q[i]
        q[i] = orig + step
        hi = info_nce(q, keys, positive_index, temperature)
        q[i] = orig - step
        lo = info_nce(q, keys, positive_index, temperature)
        q[i] = orig
        grad[i] = (hi - lo) / (2.0 * step)
    return grad
