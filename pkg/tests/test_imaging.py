"""Image buffer, codec, and crop primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tadac_forge.errors import BoundsError, IOFailure, ValidationError
from tadac_forge.imaging import (
    CropWindow,
    ImageBuffer,
    crop,
    load_image,
    quantize_to_bytes,
    save_image,
)

from conftest import constant_image, structured_pixels


class TestImageBuffer:
    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValidationError):
            ImageBuffer(np.full((2, 2, 3), 1.5))
        with pytest.raises(ValidationError):
            ImageBuffer(np.full((2, 2, 3), -0.1))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValidationError):
            ImageBuffer(np.zeros((4, 4)))
        with pytest.raises(ValidationError):
            ImageBuffer(np.zeros((4, 4, 4)))

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 2, 3))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValidationError):
            ImageBuffer(bad)

    def test_pixels_are_read_only(self):
        img = constant_image(0.5)
        with pytest.raises(ValueError):
            img.pixels[0, 0, 0] = 0.0

    def test_construction_copies_input(self):
        arr = np.zeros((2, 2, 3))
        img = ImageBuffer(arr)
        arr[0, 0, 0] = 1.0
        assert img.pixels[0, 0, 0] == 0.0


class TestPpm:
    def test_ascii_single_white_pixel(self, tmp_path):
        path = tmp_path / "white.ppm"
        path.write_text("P3\n1 1\n255\n255 255 255\n")
        img = load_image(path)
        assert img.width == 1 and img.height == 1
        assert np.array_equal(img.pixels[0, 0], [1.0, 1.0, 1.0])

    def test_ascii_endpoint_mapping(self, tmp_path):
        path = tmp_path / "two.ppm"
        path.write_text("P3\n2 1\n255\n0 0 0 255 0 0\n")
        img = load_image(path)
        assert np.array_equal(img.pixels[0, 0], [0.0, 0.0, 0.0])
        assert np.array_equal(img.pixels[0, 1], [1.0, 0.0, 0.0])

    def test_ascii_comments_in_header(self, tmp_path):
        path = tmp_path / "comment.ppm"
        path.write_text("P3\n# a comment\n1 1\n# another\n255\n10 20 30\n")
        img = load_image(path)
        assert np.allclose(img.pixels[0, 0], np.array([10, 20, 30]) / 255.0)

    def test_binary_roundtrip(self, tmp_path):
        img = ImageBuffer(structured_pixels(9, 7))
        path = tmp_path / "out.ppm"
        save_image(img, path)
        again = load_image(path)
        assert np.array_equal(quantize_to_bytes(img), quantize_to_bytes(again))

    def test_truncated_pixel_data(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n4 4\n255\n\x00\x01")
        with pytest.raises(IOFailure, match="short.ppm"):
            load_image(path)

    def test_unsupported_maxval(self, tmp_path):
        path = tmp_path / "deep.ppm"
        path.write_text("P3\n1 1\n65535\n0 0 0\n")
        with pytest.raises(IOFailure, match="maxval"):
            load_image(path)


class TestPng:
    def test_roundtrip_exact_bytes(self, tmp_path):
        img = ImageBuffer(structured_pixels(16, 12))
        path = tmp_path / "img.png"
        save_image(img, path)
        again = load_image(path)
        assert np.array_equal(quantize_to_bytes(img), quantize_to_bytes(again))

    def test_truncated_stream_reports_path(self, tmp_path):
        path = tmp_path / "broken.png"
        path.write_bytes(b"\x89PNG\r\n\x1a\n\x00\x00truncated")
        with pytest.raises(IOFailure, match="broken.png"):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOFailure, match="nothere.png"):
            load_image(tmp_path / "nothere.png")


class TestSave:
    def test_half_rounds_up_to_128(self, tmp_path):
        img = constant_image(0.5, width=1, height=1)
        assert quantize_to_bytes(img)[0, 0, 0] == 128
        path = tmp_path / "half.png"
        save_image(img, path)
        assert np.array_equal(
            quantize_to_bytes(load_image(path)), np.full((1, 1, 3), 128, np.uint8)
        )

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        with pytest.raises(IOFailure):
            save_image(constant_image(0.5), blocker / "img.png")

    def test_unknown_extension(self, tmp_path):
        with pytest.raises(IOFailure, match="extension"):
            save_image(constant_image(0.5), tmp_path / "img.tif")

    def test_quantized_roundtrip_of_random_bytes(self, tmp_path):
        rng = np.random.Generator(np.random.Philox(key=11))
        data = rng.integers(0, 256, size=(13, 17, 3), dtype=np.uint8)
        img = ImageBuffer(data / 255.0)
        for name in ("r.png", "r.ppm"):
            save_image(img, tmp_path / name)
            assert np.array_equal(
                quantize_to_bytes(load_image(tmp_path / name)), data
            )


class TestCrop:
    def test_full_window_is_identity(self, structured_image):
        window = CropWindow(0, 0, structured_image.width)
        assert crop(structured_image, window) == structured_image

    def test_corner_pixel(self):
        arr = np.zeros((2, 2, 3))
        arr[1, 1] = [0.1, 0.2, 0.3]
        img = ImageBuffer(arr)
        out = crop(img, CropWindow(1, 1, 1))
        assert np.allclose(out.pixels[0, 0], [0.1, 0.2, 0.3])

    def test_out_of_bounds(self, structured_image):
        with pytest.raises(BoundsError):
            crop(structured_image, CropWindow(structured_image.width - 15, 0, 16))

    def test_pixel_mapping(self, structured_image):
        window = CropWindow(5, 9, 20)
        out = crop(structured_image, window)
        assert np.array_equal(
            out.pixels, structured_image.pixels[9:29, 5:25]
        )

    @given(
        ax=st.integers(0, 20), ay=st.integers(0, 20), aside=st.integers(8, 40),
        bx=st.integers(0, 6), by=st.integers(0, 6), bside=st.integers(1, 2),
    )
    @settings(max_examples=60, deadline=None)
    def test_crop_composition(self, ax, ay, aside, bx, by, bside, structured_image):
        if ax + aside > structured_image.width or ay + aside > structured_image.height:
            return
        if bx + bside > aside or by + bside > aside:
            return
        inner = crop(crop(structured_image, CropWindow(ax, ay, aside)),
                     CropWindow(bx, by, bside))
        direct = crop(structured_image, CropWindow(ax + bx, ay + by, bside))
        assert inner == direct

    def test_values_stay_in_range(self, structured_image):
        out = crop(structured_image, CropWindow(3, 3, 32))
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0
