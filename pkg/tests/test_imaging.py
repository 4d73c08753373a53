import io

import numpy as np
import pytest
from PIL import Image

from copyspace.annotations import BoundingBox
from copyspace.errors import ArgumentError, DecodeError
from copyspace.imaging import (
    SOBEL_MAX,
    build_integral,
    complexity_map,
    decode_image,
    encode_png,
    image_size,
    pixel_rect,
    region_mean,
    to_luma,
)

from oracles import naive_mean, naive_sobel


def _png(arr, mode=None, fmt="PNG"):
    buf = io.BytesIO()
    Image.fromarray(arr, mode).save(buf, format=fmt)
    return buf.getvalue()


class TestDecode:
    def test_png_rgb(self):
        arr = np.zeros((4, 6, 3), np.uint8)
        arr[..., 0] = 255
        img = decode_image(_png(arr))
        assert img.shape == (4, 6, 3)
        np.testing.assert_array_equal(img[..., 0], 1.0)
        np.testing.assert_array_equal(img[..., 1:], 0.0)

    def test_gray_png_is_expanded(self):
        img = decode_image(_png(np.full((3, 3), 51, np.uint8)))
        assert img.shape == (3, 3, 3)
        np.testing.assert_allclose(img, 0.2)

    def test_jpeg(self):
        img = decode_image(_png(np.full((8, 8, 3), 128, np.uint8), fmt="JPEG"))
        assert img.shape == (8, 8, 3)
        assert abs(img.mean() - 128 / 255) < 0.02

    def test_corrupt_bytes(self):
        with pytest.raises(DecodeError):
            decode_image(b"\x89PNG\r\n\x1a\n garbage")

    def test_truncated_png(self):
        data = _png(np.zeros((32, 32, 3), np.uint8))
        with pytest.raises(DecodeError):
            decode_image(data[: len(data) // 2])

    def test_unsupported_format(self):
        with pytest.raises(DecodeError):
            decode_image(_png(np.zeros((4, 4, 3), np.uint8), fmt="BMP"))

    def test_encode_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.integers(0, 256, (5, 7, 3)).astype(np.uint8)
        data = encode_png(arr / 255.0)
        np.testing.assert_array_equal(np.round(decode_image(data) * 255), arr)
        p = tmp_path / "x.png"
        p.write_bytes(data)
        assert image_size(p) == (7, 5)


class TestLuma:
    def test_weights(self):
        img = np.zeros((1, 3, 3))
        img[0, 0, 0] = img[0, 1, 1] = img[0, 2, 2] = 1.0
        np.testing.assert_allclose(to_luma(img)[0], [0.2126, 0.7152, 0.0722])

    def test_white_is_one(self):
        assert to_luma(np.ones((2, 2, 3))).max() <= 1.0
        np.testing.assert_allclose(to_luma(np.ones((2, 2, 3))), 1.0)

    def test_rejects_gray(self):
        with pytest.raises(ArgumentError):
            to_luma(np.zeros((4, 4)))


class TestComplexityMap:
    def test_constant_image_is_zero(self):
        np.testing.assert_array_equal(complexity_map(np.full((9, 11), 0.37)), 0.0)

    def test_step_edge(self):
        img = np.zeros((5, 6))
        img[:, 3:] = 1.0
        cmap = complexity_map(img)
        np.testing.assert_allclose(cmap[:, 2], 4 / SOBEL_MAX)
        np.testing.assert_allclose(cmap[:, 3], 4 / SOBEL_MAX)
        np.testing.assert_array_equal(cmap[:, [0, 1, 4, 5]], 0.0)

    def test_range(self):
        rng = np.random.default_rng(1)
        cmap = complexity_map(rng.random((20, 20)))
        assert cmap.min() >= 0.0 and cmap.max() <= 1.0

    def test_checkerboard_reaches_bound_region(self):
        img = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
        assert complexity_map(img).max() <= 1.0

    def test_too_small(self):
        with pytest.raises(ArgumentError):
            complexity_map(np.zeros((2, 10)))

    def test_matches_naive_sobel(self):
        rng = np.random.default_rng(2)
        img = rng.random((13, 17))
        np.testing.assert_allclose(complexity_map(img), np.clip(naive_sobel(img) / SOBEL_MAX, 0, 1), atol=1e-12)


class TestIntegral:
    def test_shape_and_read_only(self):
        ii = build_integral(np.ones((3, 4)))
        assert ii.table.shape == (4, 5)
        assert (ii.width, ii.height) == (4, 3)
        with pytest.raises(ValueError):
            ii.table[0, 0] = 1.0

    def test_example_sums(self):
        m = np.arange(12, dtype=float).reshape(3, 4)
        ii = build_integral(m)
        assert ii.region_sum(0, 0, 4, 3) == m.sum()
        assert ii.region_sum(1, 1, 3, 2) == m[1, 1:3].sum()
        rects = np.array([[0, 0, 1, 1], [2, 0, 4, 3]])
        np.testing.assert_array_equal(ii.region_sums(rects), [0.0, m[:, 2:].sum()])

    def test_region_mean_uniform(self):
        ii = build_integral(np.full((10, 10), 0.25))
        assert region_mean(ii, BoundingBox(2, 3, 7, 9)) == pytest.approx(0.25, abs=1e-12)

    def test_region_mean_rounds_outward(self):
        m = np.zeros((4, 4))
        m[0, 0] = 1.0
        ii = build_integral(m)
        assert pixel_rect(BoundingBox(0.5, 0.5, 1.5, 1.2)) == (0, 0, 2, 2)
        assert region_mean(ii, BoundingBox(0.5, 0.5, 1.5, 1.2)) == pytest.approx(0.25)

    def test_region_mean_outside_map(self):
        ii = build_integral(np.zeros((4, 4)))
        with pytest.raises(ArgumentError):
            region_mean(ii, BoundingBox(0, 0, 5, 2))
        with pytest.raises(ArgumentError):
            region_mean(ii, BoundingBox(-1, 0, 2, 2))

    def test_region_mean_matches_loop(self):
        rng = np.random.default_rng(3)
        m = rng.random((30, 40))
        ii = build_integral(m)
        for _ in range(50):
            x0, x1 = sorted(rng.choice(41, 2, replace=False))
            y0, y1 = sorted(rng.choice(31, 2, replace=False))
            got = region_mean(ii, BoundingBox(x0, y0, x1, y1))
            assert got == pytest.approx(naive_mean(m, x0, y0, x1, y1), abs=1e-9)
