"""Pointwise and histogram filter blocks.

All operations are pure functions of their inputs and act per pixel (the
histogram blocks derive a global affine remap first, then apply it per
pixel). Parameters that the original effects express in 0-255 units
(soft-threshold cutoff, minimum dynamic range) convert at the block
boundary; the pixel data itself always stays in [0, 1] floats.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .image import Image, luma_chroma_to_rgb, rgb_to_luma_chroma, trusted_image

__all__ = [
    "posterize",
    "luma_posterize",
    "brightness",
    "soft_threshold",
    "saturate",
    "hue",
    "colorize",
    "linear_equalize",
    "min_dynamic_range",
    "luma_percentile",
]


def _on_luma(img: Image, fn) -> Image:
    """Apply ``fn`` to the luma plane, preserving chroma on color images."""
    if img.channels == 1:
        out = fn(img.planes[0])
        return img.with_planes(out[np.newaxis])
    yuv = rgb_to_luma_chroma(img)
    out = np.clip(fn(yuv.planes[0]), 0.0, 1.0)
    return luma_chroma_to_rgb(Image(out[np.newaxis], yuv.chroma))


def posterize(img: Image, levels: int) -> Image:
    """Quantize each channel to ``levels`` evenly spaced values.

    Rounding is to nearest with ties-to-even, so an already 8-bit-quantized
    image survives levels=256 unchanged.
    """
    if not 2 <= levels <= 256:
        raise InvalidInputError(f"levels must be in [2, 256], got {levels}")
    n = levels - 1
    return img.with_planes(np.rint(img.planes * n) / n)


def luma_posterize(img: Image, levels: int) -> Image:
    """Posterize luma only; chroma passes through untouched."""
    if not 2 <= levels <= 256:
        raise InvalidInputError(f"levels must be in [2, 256], got {levels}")
    n = levels - 1
    return _on_luma(img, lambda y: np.rint(y * n) / n)


def brightness(img: Image, factor: float) -> Image:
    """Scale luma by ``factor``, clipping at white."""
    if factor < 0:
        raise InvalidInputError(f"brightness factor must be >= 0, got {factor}")
    return _on_luma(img, lambda y: np.minimum(y * factor, 1.0))


def soft_threshold(img: Image, phi: float, epsilon: float) -> Image:
    """Smooth binary cutoff: 1 + tanh(min(0, phi * (v255 - epsilon))).

    ``phi`` is the slope per 0-255 unit and ``epsilon`` the cutoff in 0-255
    units. Values at or above the cutoff map to exactly 1; below it the
    response decays smoothly toward 0. Applied per channel.
    """
    if phi <= 0:
        raise InvalidInputError(f"phi must be positive, got {phi}")
    if not 0 <= epsilon <= 255:
        raise InvalidInputError(f"epsilon must be in [0, 255], got {epsilon}")
    # run the whole chain on one cache-sized band at a time so DRAM sees a
    # single read and a single write per sample at any image size
    out = np.empty_like(img.planes)
    src = img.planes.reshape(-1)
    dst = out.reshape(-1)
    band = 1 << 18
    for start in range(0, dst.size, band):
        seg = dst[start : start + band]
        np.multiply(src[start : start + band], 255.0, out=seg)
        np.subtract(seg, epsilon, out=seg)
        np.multiply(seg, phi, out=seg)
        np.minimum(seg, 0.0, out=seg)
        np.tanh(seg, out=seg)
        np.add(seg, 1.0, out=seg)
    # output is 1 + tanh(nonpositive finite), provably in (0, 1]
    chroma = img.chroma.copy() if img.chroma is not None else None
    return trusted_image(out, chroma)


def saturate(img: Image, s: float) -> Image:
    """Push colors away from (s > 1) or toward (s < 1) their gray value."""
    if img.channels != 3:
        raise InvalidInputError("saturation requires a color image")
    if s < 0:
        raise InvalidInputError(f"saturation must be >= 0, got {s}")
    gray = img.luma()[np.newaxis]
    out = np.clip(gray + s * (img.planes - gray), 0.0, 1.0)
    return Image(out)


def hue(img: Image, angle: float, bias=(0.0, 0.0, 0.0)) -> Image:
    """Rotate chroma by ``angle`` radians, then add an RGB bias and clip."""
    if img.channels != 3:
        raise InvalidInputError("hue rotation requires a color image")
    yuv = rgb_to_luma_chroma(img)
    u, v = yuv.chroma
    c, s = np.cos(angle), np.sin(angle)
    rotated = np.stack([c * u - s * v, s * u + c * v])
    rgb = luma_chroma_to_rgb(Image(yuv.planes, rotated))
    b = np.asarray(bias, dtype=np.float64).reshape(3, 1, 1)
    return Image(np.clip(rgb.planes + b, 0.0, 1.0))


def colorize(img: Image, hue_deg: float, sat: float, lum_scale: float = 1.0) -> Image:
    """Monochrome tint: constant hue/saturation, lightness = luma * lum_scale.

    Standard HSL evaluation with L varying per pixel.
    """
    if not 0 <= sat <= 1:
        raise InvalidInputError(f"saturation must be in [0, 1], got {sat}")
    if lum_scale < 0:
        raise InvalidInputError(f"lum_scale must be >= 0, got {lum_scale}")
    light = np.clip(img.luma() * lum_scale, 0.0, 1.0)
    c = (1.0 - np.abs(2.0 * light - 1.0)) * sat
    hp = (hue_deg % 360.0) / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    m = light - c / 2.0
    zero = np.zeros_like(c)
    sector = int(hp) % 6
    rgb_by_sector = [
        (c, x, zero),
        (x, c, zero),
        (zero, c, x),
        (zero, x, c),
        (x, zero, c),
        (c, zero, x),
    ]
    r, g, b = rgb_by_sector[sector]
    out = np.stack([r + m, g + m, b + m])
    return Image(np.clip(out, 0.0, 1.0))


def luma_percentile(y: np.ndarray, percents) -> np.ndarray:
    """Percentiles of a luma plane from a 256-bin histogram.

    Linear interpolation within bins; exact order statistics are unnecessary
    at 8-bit output precision.
    """
    hist, edges = np.histogram(np.clip(y, 0.0, 1.0), bins=256, range=(0.0, 1.0))
    total = hist.sum()
    cdf = np.concatenate([[0], np.cumsum(hist)]) / total
    out = []
    for p in np.atleast_1d(percents):
        f = p / 100.0
        idx = int(np.searchsorted(cdf, f, side="right") - 1)
        idx = min(max(idx, 0), 255)
        span = cdf[idx + 1] - cdf[idx]
        t = 0.0 if span == 0 else (f - cdf[idx]) / span
        out.append(edges[idx] + t * (edges[idx + 1] - edges[idx]))
    return np.array(out)


def linear_equalize(img: Image, low: float = 5.0, high: float = 95.0) -> Image:
    """Stretch luma so the ``low`` percentile hits 0 and ``high`` hits 1."""
    if not 0 <= low < high <= 100:
        raise InvalidInputError(f"need 0 <= low < high <= 100, got {low}, {high}")

    def stretch(y):
        pl, ph = luma_percentile(y, [low, high])
        if ph - pl < 1.0 / 256.0:  # degenerate: both percentiles in one bin
            return y.copy()
        return np.clip((y - pl) / (ph - pl), 0.0, 1.0)

    return _on_luma(img, stretch)


def min_dynamic_range(img: Image, dr: float) -> Image:
    """Expand luma contrast only if the p5..p95 span is below ``dr``/255."""
    if not 0 < dr <= 255:
        raise InvalidInputError(f"dynamic range must be in (0, 255], got {dr}")

    def expand(y):
        pl, ph = luma_percentile(y, [5.0, 95.0])
        span = ph - pl
        if span < 1.0 / 256.0 or span * 255.0 >= dr:
            return y.copy()
        mid = (pl + ph) / 2.0
        gain = (dr / 255.0) / span
        return np.clip(mid + (y - mid) * gain, 0.0, 1.0)

    return _on_luma(img, expand)
