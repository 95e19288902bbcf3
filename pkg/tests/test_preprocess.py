import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import otsu_scan, raster_ellipse
from hazardlab.errors import InvalidInputError
from hazardlab.preprocess import (
    augment,
    center_crop,
    crop_origin,
    dihedral,
    fit_ellipse,
    isup_decode,
    isup_encode,
    ordinal_xent,
    otsu_threshold,
    preprocess_spot,
    read_png,
    resize_bilinear,
    tile,
    to_grayscale,
    untile,
    write_png,
)


def rgb(value, shape=(2, 2)):
    return np.broadcast_to(np.array(value, dtype=np.uint8), shape + (3,)).copy()


class TestGrayscale:
    @pytest.mark.parametrize("value, expected", [((255, 255, 255), 255), ((0, 0, 0), 0), ((255, 0, 0), 76),
                                                 ((0, 255, 0), 150), ((0, 0, 255), 29)])
    def test_luma(self, value, expected):
        np.testing.assert_array_equal(to_grayscale(rgb(value)), expected)

    def test_rejects_float(self):
        with pytest.raises(InvalidInputError):
            to_grayscale(np.zeros((2, 2, 3)))


class TestOtsu:
    def test_bimodal(self):
        img = np.r_[np.full(50, 50), np.full(50, 200)].astype(np.uint8).reshape(10, 10)
        t, mask = otsu_threshold(img)
        assert 50 <= t < 200
        assert t == otsu_scan(img)
        assert mask.sum() == 50

    def test_two_pixels(self):
        t, mask = otsu_threshold(np.array([[0, 255]], dtype=np.uint8))
        np.testing.assert_array_equal(mask, [[True, False]])
        assert t == 0

    def test_constant(self):
        with pytest.raises(InvalidInputError):
            otsu_threshold(np.full((4, 4), 9, np.uint8))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        img = rng.integers(0, 256, (int(rng.integers(2, 30)), int(rng.integers(2, 30)))).astype(np.uint8)
        if img.min() == img.max():
            return
        assert otsu_threshold(img)[0] == otsu_scan(img)


class TestEllipse:
    def test_disc(self):
        img = raster_ellipse((1000, 1000), (500, 500), (100, 100), 0.0)
        fit = fit_ellipse(img < 128)
        assert math.dist(fit.center, (500, 500)) < 0.5
        assert fit.semi_axes[0] == pytest.approx(fit.semi_axes[1], rel=0.02)
        assert fit.semi_axes[0] == pytest.approx(100, rel=0.02)

    def test_axis_aligned(self):
        img = raster_ellipse((600, 800), (400, 300), (200, 100), 0.0)
        fit = fit_ellipse(img < 128)
        assert fit.orientation == pytest.approx(0.0, abs=1e-6)
        assert fit.semi_axes[0] == pytest.approx(200, rel=0.02)
        assert fit.semi_axes[1] == pytest.approx(100, rel=0.02)

    def test_rotated(self):
        img = raster_ellipse((600, 600), (300, 300), (200, 80), 0.6)
        assert fit_ellipse(img < 128).orientation == pytest.approx(0.6, abs=0.01)

    def test_too_few_pixels(self):
        mask = np.zeros((10, 10), bool)
        mask[2, 2:6] = True
        with pytest.raises(InvalidInputError):
            fit_ellipse(mask)

    def test_collinear(self):
        mask = np.zeros((10, 10), bool)
        mask[3, :] = True
        with pytest.raises(InvalidInputError):
            fit_ellipse(mask)


class TestCropAndTile:
    def test_identity_crop(self):
        img = np.arange(64, dtype=np.uint8).reshape(8, 8)
        np.testing.assert_array_equal(center_crop(img, (4.0, 4.0), 8), img)

    def test_corner_shifts_inward(self):
        img = np.arange(100, dtype=np.uint8).reshape(10, 10)
        assert crop_origin(img.shape, (0.0, 9.5), 4) == (0, 6)
        assert center_crop(img, (0.0, 9.5), 4).shape == (4, 4)

    def test_large_crop(self):
        img = np.zeros((2490, 2490), np.uint8)
        assert center_crop(img, (1245.0, 1245.0), 2048).shape == (2048, 2048)

    def test_side_too_large(self):
        with pytest.raises(InvalidInputError):
            center_crop(np.zeros((10, 10), np.uint8), (5, 5), 11)

    @pytest.mark.parametrize("patch, count", [(256, 64), (512, 16), (2048, 1)])
    def test_tile_counts(self, patch, count):
        img = np.random.default_rng(0).integers(0, 256, (2048, 2048), dtype=np.uint8)
        patches = tile(img, patch)
        assert len(patches) == count
        assert all(p.shape == (patch, patch) for p in patches)
        n = 2048 // patch
        np.testing.assert_array_equal(untile(patches, n, n), img)

    def test_tile_row_major(self):
        img = np.arange(16, dtype=np.uint8).reshape(4, 4)
        p = tile(img, 2)
        np.testing.assert_array_equal(p[1], [[2, 3], [6, 7]])

    def test_indivisible(self):
        with pytest.raises(InvalidInputError):
            tile(np.zeros((10, 10), np.uint8), 3)


class TestAugment:
    IMG = np.random.default_rng(0).integers(0, 256, (6, 6, 3), dtype=np.uint8)

    def test_identity(self):
        np.testing.assert_array_equal(dihedral(self.IMG, 0), self.IMG)

    def test_half_turn_twice(self):
        np.testing.assert_array_equal(dihedral(dihedral(self.IMG, 2), 2), self.IMG)

    def test_flips_are_involutions(self):
        for k in range(4, 8):
            np.testing.assert_array_equal(dihedral(dihedral(self.IMG, k), k), self.IMG)

    def test_eight_distinct_elements(self):
        seen = {dihedral(self.IMG, k).tobytes() for k in range(8)}
        assert len(seen) == 8

    def test_seeded(self):
        np.testing.assert_array_equal(augment(self.IMG, 5), augment(self.IMG, 5))

    def test_non_square(self):
        with pytest.raises(InvalidInputError):
            augment(np.zeros((4, 6), np.uint8), 0)


class TestResize:
    def test_constant(self):
        np.testing.assert_array_equal(resize_bilinear(np.full((8, 8), 77, np.uint8), 3), 77)

    def test_same_size_is_identity(self):
        img = np.random.default_rng(1).integers(0, 256, (5, 5, 3), dtype=np.uint8)
        np.testing.assert_array_equal(resize_bilinear(img, 5), img)

    def test_downscale_by_two_averages(self):
        img = np.array([[0, 100], [100, 200]], np.uint8)
        np.testing.assert_array_equal(resize_bilinear(img, 1), [[100]])


class TestSpot:
    def test_pipeline_and_png_roundtrip(self, tmp_path):
        gray = raster_ellipse((300, 320), (170, 140), (90, 70), 0.3)
        img = np.stack([gray] * 3, axis=-1)
        crop, patches, t, fit = preprocess_spot(img, side=128, patch=32)
        assert crop.shape == (128, 128, 3)
        assert len(patches) == 16
        assert 60 <= t < 220
        assert math.dist(fit.center, (170, 140)) < 1.0
        path = tmp_path / "spot.png"
        write_png(path, crop)
        np.testing.assert_array_equal(read_png(path), crop)

    def test_idempotent_on_cropped(self):
        gray = raster_ellipse((256, 256), (128, 128), (90, 90), 0.0)
        crop, _, _, _ = preprocess_spot(gray, side=256, patch=64)
        np.testing.assert_array_equal(crop, gray)

    def test_bad_file(self, tmp_path):
        path = tmp_path / "x.png"
        path.write_bytes(b"not a png")
        with pytest.raises(InvalidInputError):
            read_png(path)


class TestIsup:
    def test_encode(self):
        np.testing.assert_array_equal(isup_encode(2), [1, 1, 0, 0, 0])
        np.testing.assert_array_equal(isup_encode(0), [0] * 5)
        np.testing.assert_array_equal(isup_encode(5), [1] * 5)

    def test_decode(self):
        assert isup_decode([0.9, 0.8, 0.4, 0.1, 0.0]) == 2

    @pytest.mark.parametrize("cls", range(6))
    def test_roundtrip(self, cls):
        assert isup_decode(isup_encode(cls)) == cls

    @pytest.mark.parametrize("bad", [-1, 6, 2.5])
    def test_bad_class(self, bad):
        with pytest.raises(InvalidInputError):
            isup_encode(bad)

    def test_xent(self):
        lab = isup_encode(3)
        assert ordinal_xent(lab, lab) == pytest.approx(0.0, abs=1e-5)
        assert ordinal_xent(np.full(5, 0.5), lab) == pytest.approx(5 * math.log(2))
