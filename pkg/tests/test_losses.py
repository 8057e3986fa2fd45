"""Contrastive loss numerics and the gradient verification path."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tadac_forge.errors import ValidationError
from tadac_forge.losses import (
    PairBatch,
    consecutive_batches,
    finite_difference_grad_query,
    image_image_batch_loss,
    image_text_batch_loss,
    info_nce,
    info_nce_grad_query,
    joint_loss,
)


def naive_info_nce(q, keys, positive, temperature):
    """Scalar reference: plain exp/sum with no max-shift."""
    sims = [sum(qi * ki for qi, ki in zip(q, key)) / temperature for key in keys]
    denom = sum(math.exp(s) for s in sims)
    return -math.log(math.exp(sims[positive]) / denom)


class TestInfoNce:
    def test_single_positive_key_is_zero(self):
        assert info_nce([1.0, 0.0], [[1.0, 0.0]], 0, 0.1) == 0.0

    def test_two_equal_keys_give_ln2(self):
        loss = info_nce([1.0, 0.0], [[1.0, 0.0], [1.0, 0.0]], 0, 0.1)
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_orthogonal_negative_at_low_temperature(self):
        loss = info_nce([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], 0, 0.1)
        assert loss == pytest.approx(math.log1p(math.exp(-10)), abs=1e-12)

    def test_matches_naive_reference(self):
        rng = np.random.Generator(np.random.Philox(key=5))
        for _ in range(20):
            dim = int(rng.integers(2, 8))
            n = int(rng.integers(1, 6))
            q = rng.normal(size=dim)
            keys = rng.normal(size=(n, dim))
            pos = int(rng.integers(0, n))
            assert info_nce(q, keys, pos, 0.3) == pytest.approx(
                naive_info_nce(q, keys, pos, 0.3), rel=1e-12
            )

    def test_nonnegative_and_decreasing_in_positive_similarity(self):
        keys = np.array([[1.0, 0.0], [0.3, 0.6], [-0.2, 0.4]])
        losses = [
            info_nce([scale, 0.0], keys, 0, 0.5) for scale in (0.1, 0.5, 1.0, 2.0)
        ]
        assert all(loss >= 0 for loss in losses)
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_no_overflow_at_huge_similarities(self):
        q = np.array([1e4, 0.0])
        keys = np.array([[1.0, 0.0], [-1.0, 0.0]])
        loss = info_nce(q, keys, 0, 0.1)
        assert math.isfinite(loss) and loss == pytest.approx(0.0, abs=1e-12)

    @given(
        c=st.floats(-50, 50),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_shift_invariance_of_similarities(self, c, seed):
        rng = np.random.Generator(np.random.Philox(key=seed))
        q = rng.normal(size=4)
        if q @ q < 1e-2:
            return  # a huge shift vector would drown the check in rounding
        keys = rng.normal(size=(5, 4))
        shifted = keys + c * q / (q @ q)  # adds c to every similarity
        base = info_nce(q, keys, 2, 0.7)
        assert info_nce(q, shifted, 2, 0.7) == pytest.approx(base, abs=1e-7)

    def test_bad_inputs_rejected(self):
        with pytest.raises(ValidationError):
            info_nce([1.0], [[1.0]], 1, 0.1)  # index out of range
        with pytest.raises(ValidationError):
            info_nce([1.0], [[1.0]], 0, 0.0)  # temperature
        with pytest.raises(ValidationError):
            info_nce([np.nan], [[1.0]], 0, 0.1)
        with pytest.raises(ValidationError):
            info_nce([1.0, 0.0], [[1.0]], 0, 0.1)  # dim mismatch


class TestGradient:
    def test_single_key_gives_zero_gradient(self):
        grad = info_nce_grad_query([0.4, 0.2], [[1.0, 3.0]], 0, 0.1)
        assert np.allclose(grad, 0.0, atol=1e-15)

    def test_two_equal_similarity_keys_closed_form(self):
        q = np.array([1.0, 1.0])
        k_pos = np.array([1.0, 0.0])
        k_neg = np.array([0.0, 1.0])
        grad = info_nce_grad_query(q, np.stack([k_pos, k_neg]), 0, 0.1)
        expected = (0.5 * k_pos + 0.5 * k_neg - k_pos) / 0.1
        assert np.allclose(grad, expected, atol=1e-12)

    def test_matches_central_differences_on_random_instances(self):
        # unit-norm rows keep the softmax away from saturation, where the
        # loss flattens below finite-difference resolution
        rng = np.random.Generator(np.random.Philox(key=77))
        for _ in range(25):
            dim = int(rng.integers(2, 24))
            n = int(rng.integers(2, 9))
            q = rng.normal(size=dim)
            q /= np.linalg.norm(q)
            keys = rng.normal(size=(n, dim))
            keys /= np.linalg.norm(keys, axis=1, keepdims=True)
            pos = int(rng.integers(0, n))
            analytic = info_nce_grad_query(q, keys, pos, 1.0)
            numeric = finite_difference_grad_query(q, keys, pos, 1.0, step=1e-6)
            assert np.linalg.norm(analytic - numeric) <= 1e-6 * np.linalg.norm(numeric)

    def test_saturated_softmax_gradient_vanishes_consistently(self):
        # at tau = 0.1 a dominant positive flattens the loss; both routes
        # must then agree that the gradient is numerically zero
        q = np.array([1.0, 0.0, 0.0])
        keys = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
        analytic = info_nce_grad_query(q, keys, 0, 0.1)
        numeric = finite_difference_grad_query(q, keys, 0, 0.1)
        assert np.allclose(analytic, numeric, atol=1e-7)


def naive_batched(queries, keys, batches, temperature):
    total = 0.0
    for batch in batches:
        rows = list(batch.rows)
        q = queries[rows[batch.positive]]
        total += naive_info_nce(q, keys[rows], batch.positive, temperature)
    return total


class TestBatchLosses:
    def test_single_pair_batch_is_zero(self):
        emb = np.array([[0.3, 0.7]])
        batches = [PairBatch(rows=(0,))]
        assert image_text_batch_loss(emb, emb, batches, 0.1) == 0.0
        assert image_image_batch_loss(emb, emb, batches, 0.1) == 0.0

    def test_two_identical_batches_double_the_loss(self):
        rng = np.random.Generator(np.random.Philox(key=3))
        img = rng.normal(size=(4, 6))
        txt = rng.normal(size=(4, 6))
        img = np.vstack([img, img])
        txt = np.vstack([txt, txt])
        one = image_text_batch_loss(img[:4], txt[:4], [PairBatch(rows=(0, 1, 2, 3))], 0.2)
        two = image_text_batch_loss(
            img, txt, [PairBatch(rows=(0, 1, 2, 3)), PairBatch(rows=(4, 5, 6, 7))], 0.2
        )
        assert two == pytest.approx(2 * one, rel=1e-12)

    def test_matches_naive_summation_oracle(self):
        rng = np.random.Generator(np.random.Philox(key=21))
        img = rng.normal(size=(16, 5))
        txt = rng.normal(size=(16, 5))
        batches = [
            PairBatch(rows=tuple(range(i, i + 4)), positive=i % 4)
            for i in range(0, 16, 4)
        ]
        assert image_text_batch_loss(img, txt, batches, 0.4) == pytest.approx(
            naive_batched(img, txt, batches, 0.4), rel=1e-12
        )
        assert image_image_batch_loss(img, txt, batches, 0.4) == pytest.approx(
            naive_batched(img, txt, batches, 0.4), rel=1e-12
        )

    def test_negative_position_swap_keeps_loss(self):
        rng = np.random.Generator(np.random.Philox(key=8))
        img = rng.normal(size=(4, 3))
        txt = rng.normal(size=(4, 3))
        a = image_text_batch_loss(img, txt, [PairBatch(rows=(0, 1, 2, 3))], 0.3)
        # swap the two negatives at positions 2, 3; query and keys-set unchanged
        b = image_text_batch_loss(img, txt, [PairBatch(rows=(0, 1, 3, 2))], 0.3)
        assert a == pytest.approx(b, rel=1e-12)

    def test_identical_crops_single_pair_zero(self):
        emb = np.array([[1.0, 2.0, 3.0]])
        assert image_image_batch_loss(emb, emb, [PairBatch(rows=(0,))], 0.1) == 0.0

    def test_symmetric_variant_averages_both_directions(self):
        rng = np.random.Generator(np.random.Philox(key=13))
        img = rng.normal(size=(4, 5))
        txt = rng.normal(size=(4, 5))
        batches = [PairBatch(rows=(0, 1, 2, 3), positive=1)]
        forward = image_text_batch_loss(img, txt, batches, 0.2)
        backward = image_text_batch_loss(txt, img, batches, 0.2)
        both = image_text_batch_loss(img, txt, batches, 0.2, symmetric=True)
        assert both == pytest.approx((forward + backward) / 2, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            image_text_batch_loss(
                np.zeros((2, 3)), np.zeros((2, 4)), [PairBatch(rows=(0, 1))], 0.1
            )

    def test_consecutive_batches_layout(self):
        batches = consecutive_batches(8, 4)
        assert [b.rows for b in batches] == [(0, 1, 2, 3), (4, 5, 6, 7)]
        assert all(b.positive == 0 for b in batches)
        with pytest.raises(ValidationError):
            consecutive_batches(7, 4)

    def test_bad_batch_definitions_rejected(self):
        with pytest.raises(ValidationError):
            PairBatch(rows=())
        with pytest.raises(ValidationError):
            PairBatch(rows=(0, 1), positive=2)
        with pytest.raises(ValidationError):
            image_text_batch_loss(
                np.zeros((2, 2)), np.zeros((2, 2)), [PairBatch(rows=(0, 5))], 0.1
            )


class TestJointLoss:
    def test_worked_blend(self):
        assert joint_loss(1.0, 0.0, 0.7) == pytest.approx(0.3, abs=1e-12)
        # affine form is exact in float; the decimal literal 0.3 sits one ulp away
        assert joint_loss(1.0, 0.0, 0.7) == 1.0 - 0.7

    def test_endpoints(self):
        assert joint_loss(1.25, 9.5, 0.0) == 1.25
        assert joint_loss(1.25, 9.5, 1.0) == 9.5

    def test_alpha_out_of_range(self):
        with pytest.raises(ValidationError):
            joint_loss(1.0, 1.0, -0.1)
        with pytest.raises(ValidationError):
            joint_loss(1.0, 1.0, 1.1)

    @given(
        l1=st.floats(0, 100), l2=st.floats(0, 100),
        alpha=st.floats(0, 1), scale=st.floats(0.1, 5),
    )
    @settings(max_examples=80, deadline=None)
    def test_affine_in_both_losses(self, l1, l2, alpha, scale):
        direct = joint_loss(scale * l1, scale * l2, alpha)
        assert direct == pytest.approx(scale * joint_loss(l1, l2, alpha), rel=1e-9)
