import numpy as np
import pytest

from styler.errors import InvalidInputError
from styler.image import Image
from styler.pixel_ops import luma_posterize
from styler.spatial_ops import (
    default_hatch_tiles,
    gaussian_blur,
    gaussian_kernel,
    halftone,
    pattern_fill,
    sobel,
)
from synth import random_image, synthetic_photo


class TestGaussianBlur:
    def test_sigma_zero_identity(self):
        img = synthetic_photo(1, 12, 12)
        out = gaussian_blur(img, 0.0)
        assert np.array_equal(out.planes, img.planes)

    def test_constant_unchanged(self):
        img = Image(np.full((1, 16, 16), 0.6))
        out = gaussian_blur(img, 2.5)
        assert np.abs(out.planes - 0.6).max() < 1e-12

    def test_impulse_matches_kernel(self):
        n = 17
        plane = np.zeros((n, n))
        plane[8, 8] = 1.0
        out = gaussian_blur(Image(plane), 1.0).planes[0]
        k = gaussian_kernel(1.0)
        expected = np.outer(k, k)
        r = len(k) // 2
        window = out[8 - r : 8 + r + 1, 8 - r : 8 + r + 1]
        assert np.abs(window - expected).max() < 1e-12
        assert abs(out.sum() - 1.0) < 1e-5

    def test_mean_preserved(self):
        img = random_image(7, 128, 128)
        out = gaussian_blur(img, 2.0)
        assert abs(out.planes.mean() - img.planes.mean()) < 1e-4

    def test_negative_sigma_rejected(self):
        with pytest.raises(InvalidInputError):
            gaussian_blur(synthetic_photo(0, 8, 8), -1.0)


def brute_force_sobel(y):
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
    ky = kx.T
    h, w = y.shape
    pad = np.pad(y, 1, mode="edge")
    gx = np.zeros_like(y)
    gy = np.zeros_like(y)
    for i in range(h):
        for j in range(w):
            win = pad[i : i + 3, j : j + 3]
            gx[i, j] = (win * kx).sum()
            gy[i, j] = (win * ky).sum()
    return np.clip(np.hypot(gx, gy), 0, 1)


class TestSobel:
    def test_constant_is_zero(self):
        out = sobel(Image(np.full((1, 8, 8), 0.5)))
        assert np.abs(out.planes).max() < 1e-12

    def test_ramp_magnitude(self):
        s = 0.01
        y = np.tile(np.arange(16) * s, (8, 1))
        out = sobel(Image(y)).planes[0]
        assert np.abs(out[2:-2, 2:-2] - 8 * s).max() < 1e-12

    def test_matches_brute_force(self):
        y = random_image(3, 5, 5).planes[0] * 0.1
        out = sobel(Image(y)).planes[0]
        assert np.abs(out - brute_force_sobel(y)).max() < 1e-12

    def test_rot90_equivariance(self):
        img = synthetic_photo(5, 20, 20, color=False)
        a = sobel(Image(np.rot90(img.planes[0]).copy())).planes[0]
        b = np.rot90(sobel(img).planes[0])
        assert np.abs(a - b).max() < 1e-12


class TestPatternFill:
    def test_white_maps_to_blank(self):
        out = pattern_fill(Image(np.ones((1, 20, 20))))
        assert np.allclose(out.planes, 1.0)

    def test_black_tiles_densest(self):
        tiles = default_hatch_tiles()
        out = pattern_fill(Image(np.zeros((1, 32, 32))))
        expected = np.tile(tiles[0], (2, 2))
        assert np.array_equal(out.planes[0], expected)

    def test_level_boundary_follows_posterization(self):
        img = synthetic_photo(11, 24, 24, color=False)
        tiles = default_hatch_tiles(count=3)
        out = pattern_fill(img, tiles)
        levels = luma_posterize(img, 3).planes[0]
        idx = np.rint(levels * 2).astype(int)
        # blank tile regions must be exactly white
        assert np.allclose(out.planes[0][idx == 2], 1.0)

    def test_empty_set_rejected(self):
        with pytest.raises(InvalidInputError):
            pattern_fill(synthetic_photo(0, 8, 8), [])

    def test_tiles_loadable_from_png(self, tmp_path):
        from styler.image import Image as Img, write_png
        from styler.spatial_ops import load_texture_tiles

        paths = []
        for i, tile in enumerate(default_hatch_tiles(tile=8, count=3)):
            p = tmp_path / f"tile{i}.png"
            write_png(Img(tile), p)
            paths.append(p)
        tiles = load_texture_tiles(paths)
        assert len(tiles) == 3
        # 8-bit roundtrip keeps the binary hatch patterns exact
        for loaded, original in zip(tiles, default_hatch_tiles(tile=8, count=3)):
            assert np.array_equal(loaded, original)
        out = pattern_fill(synthetic_photo(3, 16, 16, color=False), tiles)
        assert out.channels == 1


class TestHalftone:
    def test_white_input_stays_white(self):
        out = halftone(Image(np.ones((1, 32, 32))), cell=8, mode="gray")
        assert np.allclose(out.planes, 1.0)

    def test_black_input_fully_covered(self):
        out = halftone(Image(np.zeros((1, 32, 32))), cell=8, mode="gray")
        assert np.allclose(out.planes, 0.0)

    def test_half_gray_dot_area(self):
        out = halftone(Image(np.full((1, 32, 32), 0.5)), cell=8, mode="gray").planes[0]
        ink = 1.0 - out
        for cy in range(0, 32, 8):
            for cx in range(0, 32, 8):
                area = ink[cy : cy + 8, cx : cx + 8].sum()
                assert abs(area - 32.0) <= 1.0

    def test_coverage_tracks_darkness(self):
        img = synthetic_photo(13, 40, 40, color=False)
        out = halftone(img, cell=8, mode="gray").planes[0]
        for cy in range(0, 40, 8):
            for cx in range(0, 40, 8):
                want = (1.0 - img.planes[0][cy : cy + 8, cx : cx + 8]).sum()
                got = (1.0 - out[cy : cy + 8, cx : cx + 8]).sum()
                assert abs(want - got) <= 1.0  # one pixel-area

    def test_cmyk_runs_and_bounds(self):
        img = synthetic_photo(17, 33, 47)
        out = halftone(img, cell=6, mode="cmyk")
        assert out.channels == 3
        assert out.planes.min() >= 0 and out.planes.max() <= 1

    def test_small_cell_rejected(self):
        with pytest.raises(InvalidInputError):
            halftone(synthetic_photo(0, 8, 8), cell=1)
