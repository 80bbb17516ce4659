"""Deterministic synthetic test images shared across the suite."""

import numpy as np

from styler.image import Image


def synthetic_photo(seed: int, height: int = 96, width: int = 128, color: bool = True) -> Image:
    """A smooth-gradient + shapes + texture image, deterministic per seed."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    yy /= max(height - 1, 1)
    xx /= max(width - 1, 1)
    base = 0.35 + 0.3 * xx + 0.2 * np.sin(2 * np.pi * (yy * rng.uniform(0.5, 2.0) + rng.random()))
    # a few disks and a bar to create edges at varied orientations
    for _ in range(4):
        cy, cx = rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)
        r = rng.uniform(0.08, 0.25)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r**2
        base = np.where(mask, rng.uniform(0.0, 1.0), base)
    ang = rng.uniform(0, np.pi)
    band = np.abs((xx - 0.5) * np.cos(ang) + (yy - 0.5) * np.sin(ang)) < 0.04
    base = np.where(band, rng.uniform(0.0, 1.0), base)
    base += 0.03 * rng.standard_normal((height, width))
    base = np.clip(base, 0.0, 1.0)
    if not color:
        return Image(base)
    shift = 0.15 * np.stack(
        [
            np.sin(2 * np.pi * xx * rng.uniform(0.5, 1.5)),
            np.cos(2 * np.pi * yy * rng.uniform(0.5, 1.5)),
            np.sin(2 * np.pi * (xx + yy)),
        ]
    )
    rgb = np.clip(base[None] + shift, 0.0, 1.0)
    return Image(rgb)


def random_image(seed: int, height: int, width: int, channels: int = 1) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.random((channels, height, width)))
