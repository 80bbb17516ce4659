"""Raster container, color conversion, resampling, and PNG I/O.

Every filter block consumes and produces :class:`Image` values. Pixels are
stored as planar row-major float64 in nominal range [0, 1]; a grayscale
image may carry stashed chroma planes so a later block can reassemble the
original colors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage

from .errors import InvalidInputError, StateError

# Full-range BT.601: Y = 0.299 R + 0.587 G + 0.114 B, U = 0.492 (B - Y),
# V = 0.877 (R - Y). Chroma rows are derived from the luma row so that
# achromatic inputs give U = V = 0 to machine precision.
_KR, _KG = 0.299, 0.587
_KB = 1.0 - _KR - _KG
_LUMA = np.array([_KR, _KG, _KB])
RGB_TO_YUV = np.array(
    [
        _LUMA,
        0.492 * (np.array([0.0, 0.0, 1.0]) - _LUMA),
        0.877 * (np.array([1.0, 0.0, 0.0]) - _LUMA),
    ]
)
YUV_TO_RGB = np.linalg.inv(RGB_TO_YUV)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _all_finite(a: np.ndarray) -> bool:
    # min/max propagate NaN and catch infinities without allocating a
    # full-size boolean temporary
    if a.size == 0:
        return True
    lo = float(np.min(a))
    hi = float(np.max(a))
    return np.isfinite(lo) and np.isfinite(hi)


@dataclass(frozen=True)
class Image:
    """Planar float raster, 1 or 3 channels, plus optional stashed chroma.

    ``planes`` has shape (channels, height, width). Instances are immutable:
    the backing arrays are marked read-only so an Image can be shared across
    threads. Operations always allocate fresh outputs.
    """

    planes: np.ndarray
    chroma: np.ndarray | None = field(default=None)

    def __post_init__(self):
        planes = self.planes
        if planes.ndim == 2:
            planes = planes[np.newaxis]
        if planes.ndim != 3 or planes.shape[0] not in (1, 3):
            raise InvalidInputError(f"expected 1 or 3 planes, got shape {self.planes.shape}")
        if planes.shape[1] < 1 or planes.shape[2] < 1:
            raise InvalidInputError("image must be at least 1x1")
        if not _all_finite(planes):
            raise InvalidInputError("image contains non-finite samples")
        object.__setattr__(self, "planes", _readonly(planes))
        if self.chroma is not None:
            chroma = np.asarray(self.chroma)
            if chroma.shape != (2,) + planes.shape[1:]:
                raise InvalidInputError(
                    f"stashed chroma shape {chroma.shape} does not match image {planes.shape[1:]}"
                )
            if not _all_finite(chroma):
                raise InvalidInputError("stashed chroma contains non-finite samples")
            object.__setattr__(self, "chroma", _readonly(chroma))

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @classmethod
    def from_array(cls, arr, chroma=None) -> "Image":
        """Build from an (H, W), (C, H, W), or (H, W, C) float array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] in (1, 3) and arr.shape[0] not in (1, 3):
            arr = np.moveaxis(arr, 2, 0)
        elif arr.ndim == 3 and arr.shape[0] not in (1, 3) and arr.shape[2] in (1, 3):
            arr = np.moveaxis(arr, 2, 0)
        return cls(arr, chroma)

    def to_array(self) -> np.ndarray:
        """Return an (H, W) or (H, W, 3) float64 copy."""
        if self.channels == 1:
            return self.planes[0].copy()
        return np.moveaxis(self.planes, 0, 2).copy()

    def luma(self) -> np.ndarray:
        """The single plane for grayscale, or the BT.601 luma for color."""
        if self.channels == 1:
            return self.planes[0]
        return np.tensordot(RGB_TO_YUV[0], self.planes, axes=1)

    def with_planes(self, planes: np.ndarray) -> "Image":
        """Same stashed chroma, new pixel data (must keep the same size)."""
        img = Image(planes, None)
        if self.chroma is not None and self.chroma.shape[1:] == img.planes.shape[1:]:
            return Image(img.planes, self.chroma)
        return img


def trusted_image(planes: np.ndarray, chroma: np.ndarray | None = None) -> Image:
    """Construct without re-validating: for operations whose output range
    is analytically guaranteed (the finiteness scan is two full passes over
    the data, which dominates cheap pointwise ops at large sizes)."""
    img = object.__new__(Image)
    if planes.ndim == 2:
        planes = planes[np.newaxis]
    planes.setflags(write=False)
    object.__setattr__(img, "planes", planes)
    if chroma is not None:
        chroma.setflags(write=False)
    object.__setattr__(img, "chroma", chroma)
    return img


def rgb_to_luma_chroma(img: Image) -> Image:
    """Convert a color image to its luma plane, stashing U and V for later.

    The stashed planes let a downstream block reassemble the original colors
    after grayscale-only filtering.
    """
    if img.channels != 3:
        raise InvalidInputError("rgb_to_luma_chroma requires a 3-channel image")
    yuv = np.tensordot(RGB_TO_YUV, img.planes, axes=1)
    y = np.clip(yuv[0], 0.0, 1.0)
    return Image(y[np.newaxis], yuv[1:])


def luma_chroma_to_rgb(img: Image) -> Image:
    """Reassemble RGB from the current luma and previously stashed chroma."""
    if img.chroma is None:
        raise StateError("no stashed chroma; convert to grayscale first")
    if img.channels != 1:
        raise InvalidInputError("luma_chroma_to_rgb requires a 1-channel image")
    yuv = np.concatenate([img.planes, img.chroma], axis=0)
    rgb = np.tensordot(YUV_TO_RGB, yuv, axes=1)
    return Image(np.clip(rgb, 0.0, 1.0))


def _resize_plane(plane: np.ndarray, oh: int, ow: int) -> np.ndarray:
    h, w = plane.shape
    ys = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    xs = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    y0f = np.floor(ys)
    x0f = np.floor(xs)
    ty = (ys - y0f)[:, None]
    tx = (xs - x0f)[None, :]
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)
    top = plane[y0[:, None], x0[None, :]] * (1 - tx) + plane[y0[:, None], x1[None, :]] * tx
    bot = plane[y1[:, None], x0[None, :]] * (1 - tx) + plane[y1[:, None], x1[None, :]] * tx
    return top * (1 - ty) + bot * ty


def resample(img: Image, scale: float) -> Image:
    """Bilinear up- or downscale by ``scale``; new dims = round(old * scale).

    Pixel centers are mapped with the half-pixel convention
    ``src = (dst + 0.5) * (in_size / out_size) - 0.5`` and edge samples are
    replicated.
    """
    if not scale > 0:
        raise InvalidInputError(f"scale must be positive, got {scale}")
    if scale == 1.0:
        return Image(img.planes, img.chroma)
    oh = max(1, int(round(img.height * scale)))
    ow = max(1, int(round(img.width * scale)))
    out = np.stack([_resize_plane(p, oh, ow) for p in img.planes])
    return Image(out)


def sample_clamped(img: Image, x: int, y: int, c: int = 0) -> float:
    """Sample with replicate padding: coordinates clamp to the valid range."""
    xi = min(max(int(x), 0), img.width - 1)
    yi = min(max(int(y), 0), img.height - 1)
    return float(img.planes[c, yi, xi])


def to_uint8(img: Image) -> np.ndarray:
    """Quantize to 8-bit, shape (H, W) or (H, W, 3)."""
    arr = img.to_array()
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> Image:
    """Build an Image from 8-bit data, scaling by 1/255."""
    return Image.from_array(np.asarray(arr, dtype=np.float64) / 255.0)


def read_png(path) -> Image:
    """Read an 8-bit PNG (or other PIL-readable raster) as a float Image.

    Grayscale files load as 1 channel; everything else converts to RGB.
    Alpha is not carried (non-goal); RGBA flattens through PIL's convert.
    """
    with _PILImage.open(path) as pil:
        if pil.mode == "L":
            arr = np.asarray(pil, dtype=np.uint8)
        else:
            arr = np.asarray(pil.convert("RGB"), dtype=np.uint8)
    return from_uint8(arr)


def write_png(img: Image, path) -> None:
    """Write as 8-bit PNG; grayscale images produce single-channel files."""
    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    _PILImage.fromarray(arr, mode=mode).save(path, format="PNG")


def png_bytes(img: Image, compress_level: int = 6) -> bytes:
    """Encode to PNG in memory (used by the preview server).

    Lower ``compress_level`` trades bytes for encode latency; every level
    is lossless and deterministic.
    """
    import io

    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    _PILImage.fromarray(arr, mode=mode).save(buf, format="PNG", compress_level=compress_level)
    return buf.getvalue()
