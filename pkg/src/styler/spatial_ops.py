"""Convolutional and texture-synthesis filter blocks.

Boundary handling is replicate (clamp) padding throughout. smooth_plane
and sobel_gradients also serve as primitives for the feature and
reference-filter modules.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidInputError
from .image import Image, rgb_to_luma_chroma, trusted_image

__all__ = [
    "gaussian_kernel",
    "smooth_plane",
    "gaussian_blur",
    "sobel",
    "sobel_gradients",
    "default_hatch_tiles",
    "pattern_fill",
    "halftone",
]


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian truncated at radius ceil(3*sigma), normalized to 1."""
    if sigma <= 0:
        return np.array([1.0])
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth_plane(plane: np.ndarray, sigma: float, out: np.ndarray | None = None) -> np.ndarray:
    """Separable Gaussian blur of a single plane with replicate padding.

    The vertical pass accumulates weighted whole rows over a cache-sized
    band (column-strided access thrashes the TLB on wide images); the
    horizontal pass runs along contiguous lines.
    """
    if sigma <= 0:
        return plane.copy()
    k = gaussian_kernel(sigma)
    radius = len(k) // 2
    h, w = plane.shape
    if out is None:
        out = np.empty_like(plane)
    padded = np.pad(plane, ((radius, radius), (0, 0)), mode="edge")
    band = max(16, 196_608 // max(w, 1))
    tmp = np.empty((min(band, h), w))
    for y0 in range(0, h, band):
        y1 = min(y0 + band, h)
        ob = out[y0:y1]
        tb = tmp[: y1 - y0]
        np.multiply(padded[y0:y1], k[0], out=ob)
        for j in range(1, len(k)):
            np.multiply(padded[y0 + j : y1 + j], k[j], out=tb)
            np.add(ob, tb, out=ob)
    correlate1d(out, k, axis=1, mode="nearest", output=out)
    return out


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Blur every channel with a normalized Gaussian; sigma=0 is identity."""
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return Image(img.planes, img.chroma)
    out = np.empty_like(img.planes)
    for c in range(img.channels):
        smooth_plane(img.planes[c], sigma, out=out[c])
    # convex combination of finite samples: no validation scan needed
    chroma = img.chroma.copy() if img.chroma is not None else None
    return trusted_image(out, chroma)


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def sobel_gradients(y: np.ndarray):
    """Horizontal and vertical 3x3 Sobel responses (unnormalized)."""
    smooth = np.array([1.0, 2.0, 1.0])
    diff = np.array([-1.0, 0.0, 1.0])
    gx = correlate1d(correlate1d(y, diff, axis=1, mode="nearest"), smooth, axis=0, mode="nearest")
    gy = correlate1d(correlate1d(y, diff, axis=0, mode="nearest"), smooth, axis=1, mode="nearest")
    return gx, gy


def sobel(img: Image) -> Image:
    """Edge magnitude clip(sqrt(gx^2 + gy^2)) of the luma channel."""
    y = img.luma()
    gx, gy = sobel_gradients(y)
    mag = np.clip(np.hypot(gx, gy), 0.0, 1.0)
    chroma = None
    if img.channels == 3:
        chroma = rgb_to_luma_chroma(img).chroma
    return Image(mag[np.newaxis], chroma)


def default_hatch_tiles(tile: int = 16, count: int = 5) -> list[np.ndarray]:
    """Procedural 45-degree hatch tiles: count-1 strokes down to blank white.

    Index 0 is the densest hatch, the last tile is plain white, matching the
    dark-to-light level ordering of pattern_fill.
    """
    tiles = []
    for level in range(count):
        strokes = count - 1 - level
        t = np.ones((tile, tile))
        if strokes > 0:
            yy, xx = np.mgrid[0:tile, 0:tile]
            diag = (yy + xx) % tile
            offsets = np.rint(np.arange(strokes) * tile / strokes).astype(int) % tile
            mask = np.isin(diag, offsets)
            t[mask] = 0.0
        tiles.append(t)
    return tiles


def load_texture_tiles(paths) -> list[np.ndarray]:
    """Load hatch tiles from PNG files (converted to luma), darkest first."""
    from .image import read_png

    tiles = []
    for path in paths:
        img = read_png(path)
        tiles.append(img.luma().copy())
    if not tiles:
        raise InvalidInputError("texture set must not be empty")
    return tiles


def pattern_fill(img: Image, textures: list[np.ndarray] | None = None) -> Image:
    """Replace each pixel with a texture tile chosen by its posterized luma.

    Level 0 (darkest) uses the first texture; the brightest level uses the
    last. All tiles must share one shape and tile the plane periodically.
    """
    if textures is None:
        textures = default_hatch_tiles()
    if len(textures) == 0:
        raise InvalidInputError("texture set must not be empty")
    shapes = {t.shape for t in textures}
    if len(shapes) != 1:
        raise InvalidInputError("all textures must have the same tile size")
    levels = len(textures)
    y = img.luma()
    idx = np.clip(np.rint(y * (levels - 1)).astype(np.int64), 0, levels - 1)
    th, tw = textures[0].shape
    h, w = y.shape
    yy, xx = np.mgrid[0:h, 0:w]
    stack = np.stack([np.asarray(t, dtype=np.float64) for t in textures])
    out = stack[idx, yy % th, xx % tw]
    chroma = rgb_to_luma_chroma(img).chroma if img.channels == 3 else None
    return Image(out[np.newaxis], chroma)


def _render_dots(coverage, cell, height, width, origin_y=0.0, origin_x=0.0, angle=0.0):
    """Anti-aliased dot screen for one ink given per-cell coverage.

    Cells live on a grid rotated by ``angle``; a coverage above 0.5 renders
    as a white hole in solid ink (the plain disc formula cannot reach full
    coverage: a disc of area = cell^2 still leaves the cell corners bare).
    Returns the ink amount per pixel in [0, 1].
    """
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    ca, sa = np.cos(angle), np.sin(angle)
    ry = -sa * xx + ca * yy - origin_y
    rx = ca * xx + sa * yy - origin_x
    iy = np.floor(ry / cell).astype(np.int64)
    ix = np.floor(rx / cell).astype(np.int64)
    iy -= iy.min()
    ix -= ix.min()
    flat = iy * (ix.max() + 1) + ix
    counts = np.bincount(flat.ravel())
    sums = np.bincount(flat.ravel(), weights=coverage.ravel())
    mean_cov = np.clip(sums / np.maximum(counts, 1), 0.0, 1.0)
    cov = mean_cov[flat]
    # distance from each pixel to its cell's dot center, in rotated coords
    cy = (np.floor(ry / cell) + 0.5) * cell
    cx = (np.floor(rx / cell) + 0.5) * cell
    d = np.hypot(ry - cy, rx - cx)
    inverted = cov > 0.5
    frac = np.where(inverted, 1.0 - cov, cov)
    r = cell * np.sqrt(frac / np.pi)
    dot = np.clip(r - d + 0.5, 0.0, 1.0)  # 1 px anti-aliased rim
    dot = np.where(frac <= 0.0, 0.0, dot)  # radius 0 must paint nothing
    return np.where(inverted, 1.0 - dot, dot)


# classical screen angles (degrees) for cyan, magenta, yellow, black
_CMYK_ANGLES = {"c": 15.0, "m": 75.0, "y": 0.0, "k": 45.0}


def halftone(img: Image, cell: int = 8, mode: str = "gray") -> Image:
    """Render the image as a screen of variable-size dots.

    gray mode uses a single unrotated black screen on the luma; cmyk mode
    separates into four inks, each on its own classically rotated screen.
    """
    if cell < 2:
        raise InvalidInputError(f"cell must be >= 2, got {cell}")
    if mode not in ("gray", "cmyk"):
        raise InvalidInputError(f"mode must be 'gray' or 'cmyk', got {mode!r}")
    h, w = img.height, img.width
    if mode == "gray":
        ink = _render_dots(1.0 - img.luma(), cell, h, w)
        chroma = rgb_to_luma_chroma(img).chroma if img.channels == 3 else img.chroma
        return Image((1.0 - ink)[np.newaxis], chroma)
    if img.channels != 3:
        raise InvalidInputError("cmyk halftone requires a color image")
    r, g, b = img.planes
    k = 1.0 - np.maximum.reduce([r, g, b])
    denom = np.maximum(1.0 - k, 1e-9)
    c = (1.0 - r - k) / denom
    m = (1.0 - g - k) / denom
    y = (1.0 - b - k) / denom
    fields = {}
    for name, cov in zip("cmyk", (c, m, y, k)):
        ang = np.deg2rad(_CMYK_ANGLES[name])
        fields[name] = _render_dots(cov, cell, h, w, angle=ang)
    out = np.stack(
        [
            (1.0 - fields["c"]) * (1.0 - fields["k"]),
            (1.0 - fields["m"]) * (1.0 - fields["k"]),
            (1.0 - fields["y"]) * (1.0 - fields["k"]),
        ]
    )
    return Image(np.clip(out, 0.0, 1.0))
