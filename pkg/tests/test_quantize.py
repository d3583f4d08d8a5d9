import numpy as np
import pytest

from nsc.imaging import (
    _gaussian_kernel,
    image_mse,
    image_ssim,
    read_ppm,
    synthetic_image,
    to_gray,
    write_ppm,
)
from nsc.quantize import (
    ExactDistance,
    KMeansConfig,
    SurrogateDistance,
    kmeans_palette,
    quantize_image,
    remap,
)
from nsc.rng import Rng


def solid(rgb, w=8, h=8):
    return np.tile(np.array(rgb, dtype=np.uint8), (h, w, 1))


class TestKMeans:
    def test_uniform_image_k1_fixed_point(self):
        img = solid([10, 200, 60])
        c = kmeans_palette(img, KMeansConfig(k=1))
        assert np.allclose(c[0], np.array([10, 200, 60]) / 255.0, atol=1e-12)

    def test_two_color_image_k2(self):
        img = solid([0, 0, 0])
        img[:, 4:, :] = 255
        c = kmeans_palette(img, KMeansConfig(k=2, seed=3))
        got = {tuple(np.round(r, 6)) for r in c}
        assert got == {(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)}

    def test_k_reduced_with_warning(self):
        img = solid([5, 5, 5])
        with pytest.warns(UserWarning):
            c = kmeans_palette(img, KMeansConfig(k=4))
        assert c.shape == (1, 3)

    def test_objective_monotone_on_real_image(self):
        img = synthetic_image(32, 32)
        # the assertion inside kmeans_palette fires on any increase
        kmeans_palette(img, KMeansConfig(k=5, seed=7))

    def test_quantized_distinct_colors_at_most_k(self):
        img = synthetic_image(48, 48)
        out, _ = quantize_image(img, KMeansConfig(k=5, seed=1))
        assert np.unique(out.reshape(-1, 3), axis=0).shape[0] <= 5


class TestRemap:
    def test_k1_constant_image(self):
        img = synthetic_image(16, 16)
        out = remap(img, np.array([[0.5, 0.25, 1.0]]))
        assert np.unique(out.reshape(-1, 3), axis=0).shape[0] == 1

    def test_tie_breaks_to_lower_index(self):
        img = solid([128, 128, 128], w=1, h=1)
        pal = np.array([[0.75, 128 / 255, 128 / 255], [0.25 + 128 / 255 - 0.25, 128 / 255, 128 / 255]])
        # both centroids equidistant from the pixel: index 0 must win
        pal = np.array([[128 / 255 + 0.1, 128 / 255, 128 / 255],
                        [128 / 255 - 0.1, 128 / 255, 128 / 255]])
        out = remap(img, pal)
        assert np.array_equal(out[0, 0], np.clip(np.round(pal[0] * 255), 0, 255).astype(np.uint8))

    def test_idempotent_on_quantized_image(self):
        img = synthetic_image(24, 24)
        out, pal = quantize_image(img, KMeansConfig(k=4, seed=5))
        again = remap(out, pal)
        assert np.array_equal(out, again)


class TestImageMse:
    def test_identical_zero(self):
        img = synthetic_image(16, 16)
        assert image_mse(img, img) == 0.0

    def test_uniform_plus_ten_gives_hundred(self):
        a = solid([50, 60, 70])
        b = solid([60, 70, 80])
        assert image_mse(a, b) == 100.0

    def test_matches_naive_loop(self):
        rng = Rng(1)
        a = rng.child("a").integers(0, 256, size=(9, 7, 3)).astype(np.uint8)
        b = rng.child("b").integers(0, 256, size=(9, 7, 3)).astype(np.uint8)
        total = 0.0
        for i in range(9):
            for j in range(7):
                for ch in range(3):
                    total += (float(a[i, j, ch]) - float(b[i, j, ch])) ** 2
        assert image_mse(a, b) == pytest.approx(total / (9 * 7 * 3), rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            image_mse(solid([0, 0, 0], 4, 4), solid([0, 0, 0], 5, 4))


def naive_ssim(a, b):
    """Double-loop oracle with the same window/constants."""
    x, y = to_gray(a), to_gray(b)
    kernel = _gaussian_kernel(7, 1.5)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    h, w = x.shape
    vals = []
    for i in range(h - 6):
        for j in range(w - 6):
            wx = x[i:i + 7, j:j + 7]
            wy = y[i:i + 7, j:j + 7]
            mx = float(np.sum(wx * kernel))
            my = float(np.sum(wy * kernel))
            sxx = float(np.sum(wx * wx * kernel)) - mx * mx
            syy = float(np.sum(wy * wy * kernel)) - my * my
            sxy = float(np.sum(wx * wy * kernel)) - mx * my
            vals.append(((2 * mx * my + c1) * (2 * sxy + c2))
                        / ((mx * mx + my * my + c1) * (sxx + syy + c2)))
    return float(np.mean(vals))


class TestImageSsim:
    def test_self_similarity_exactly_one(self):
        img = synthetic_image(20, 20)
        assert image_ssim(img, img) == 1.0

    def test_inverted_image_strictly_worse(self):
        img = synthetic_image(20, 20)
        assert image_ssim(img, 255 - img) < 1.0

    def test_constant_offset_matches_naive_oracle(self):
        a = solid([100, 100, 100], 12, 12)
        b = solid([101, 101, 101], 12, 12)
        assert image_ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)

    def test_random_pair_matches_naive_oracle(self):
        rng = Rng(2)
        a = rng.child("a").integers(0, 256, size=(10, 11, 3)).astype(np.uint8)
        b = rng.child("b").integers(0, 256, size=(10, 11, 3)).astype(np.uint8)
        assert image_ssim(a, b) == pytest.approx(naive_ssim(a, b), abs=1e-10)

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError):
            image_ssim(solid([0, 0, 0], 5, 5), solid([0, 0, 0], 5, 5))


class TestPpm:
    def test_round_trip(self, tmp_path):
        img = synthetic_image(13, 9)
        path = tmp_path / "img.ppm"
        write_ppm(img, path)
        assert np.array_equal(read_ppm(path), img)

    def test_comment_header(self, tmp_path):
        img = solid([1, 2, 3], 2, 2)
        path = tmp_path / "c.ppm"
        with open(path, "wb") as fh:
            fh.write(b"P6\n# a comment\n2 2\n255\n" + img.tobytes())
        assert np.array_equal(read_ppm(path), img)


class TestSurrogateDistancePath:
    def test_surrogate_matching_exact_distance_gives_same_palette(self):
        # a "surrogate" that computes the true kernel shows path equivalence
        class TrueKernelDistance:
            def __call__(self, pixels, centroids):
                return ExactDistance()(pixels, centroids)

        img = synthetic_image(24, 24)
        exact_pal = kmeans_palette(img, KMeansConfig(k=3, seed=9))
        surr_pal = kmeans_palette(img, KMeansConfig(k=3, seed=9,
                                                    distance=TrueKernelDistance()))
        assert np.allclose(exact_pal, surr_pal, atol=1e-12)

    def test_surrogate_distance_consumes_zero_padded_pairs(self):
        from nsc.baselines import random_init

        dist = SurrogateDistance(random_init(seed=3))
        out = dist(np.zeros((4, 3)), np.zeros((2, 3)))
        assert out.shape == (4, 2)
