"""Spatially-varying learned FIR filtering.

A model is a bank of K small filters plus the quantizer that selects one
filter per pixel from local edge features. Inference applies exactly the
selected filter at each pixel, so its cost depends on the footprint size
but not on K. Training is streaming ridge regression: per bucket we
accumulate the normal-equation terms (an N x N Gram matrix and a length-N
moment vector), which lets a fixed amount of memory absorb any amount of
training data.

Filter taps are laid out row-major over the footprint: tap j covers offset
(dy, dx) = (j // side - r, j % side - r) with r = side // 2. Accumulation,
inference, the regularizer, and the collage all share this layout.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import linalg as _slinalg

from .errors import FormatError, InvalidInputError, NumericError
from .image import Image
from .structure_tensor import QuantizerSpec, image_features

ALLOWED_SIDES = (3, 5, 7, 9, 11)
DEFAULT_LAMBDA = 2.0**-10
CONDITION_LIMIT = 1e12

__all__ = [
    "BladeModel",
    "TrainingAccumulator",
    "infer",
    "infer_plane",
    "accumulate",
    "build_regularizer",
    "solve",
    "save_model",
    "load_model",
    "model_bytes",
    "render_collage",
    "delta_filter",
]


def delta_filter(side: int) -> np.ndarray:
    """Identity filter: 1 at the center tap, 0 elsewhere."""
    h = np.zeros(side * side)
    h[(side * side) // 2] = 1.0
    return h


@dataclass
class BladeModel:
    """A trained filter bank with its selection quantizer."""

    side: int
    quantizer: QuantizerSpec
    filters: np.ndarray  # (K, N) float64
    passes: int = 1
    name: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.side not in ALLOWED_SIDES:
            raise InvalidInputError(f"footprint side must be one of {ALLOWED_SIDES}")
        if self.passes < 1:
            raise InvalidInputError("pass count must be >= 1")
        k, n = self.quantizer.bucket_count, self.side * self.side
        filters = np.asarray(self.filters, dtype=np.float64)
        if filters.shape != (k, n):
            raise InvalidInputError(
                f"filters must have shape ({k}, {n}), got {filters.shape}"
            )
        if not np.isfinite(filters).all():
            raise InvalidInputError("filters contain non-finite coefficients")
        self.filters = filters

    @property
    def bucket_count(self) -> int:
        return self.quantizer.bucket_count

    @property
    def tap_count(self) -> int:
        return self.side * self.side


def infer_plane(y: np.ndarray, model: BladeModel, buckets: np.ndarray | None = None) -> np.ndarray:
    """One filtering pass over a single plane. Unclipped output.

    Taps accumulate in fixed row-major order with one running sum per
    pixel, which keeps the result bit-identical to a scalar loop over the
    same order regardless of image size.
    """
    if buckets is None:
        _, _, _, buckets = image_features(Image(y), model.quantizer)
    side = model.side
    r = side // 2
    h, w = y.shape
    padded = np.pad(y, r, mode="edge")
    coeffs = np.ascontiguousarray(model.filters.T)  # (N, K), row per tap
    out = np.zeros((h, w))
    # all taps run over one band of rows while it is cache-resident; the
    # per-pixel accumulation order stays tap-sequential, so results are
    # bit-identical to the naive scan regardless of the banding
    band_rows = max(1, (1 << 18) // max(w, 1))
    gathered = np.empty((min(band_rows, h), w))
    for y0 in range(0, h, band_rows):
        y1 = min(y0 + band_rows, h)
        bslice = buckets[y0:y1]
        oslice = out[y0:y1]
        g = gathered[: y1 - y0]
        for j in range(model.tap_count):
            dy, dx = divmod(j, side)
            np.take(coeffs[j], bslice, out=g)
            np.multiply(g, padded[y0 + dy : y1 + dy, dx : dx + w], out=g)
            np.add(oslice, g, out=oslice)
    return out


def infer(img: Image, model: BladeModel, passes: int | None = None, clip: bool = False) -> Image:
    """Apply the selected filter at every pixel; repeat for multi-pass models.

    Selection features are recomputed from the current plane on every pass.
    Output is unclipped unless the consumer demands display range.
    """
    if img.channels != 1:
        raise InvalidInputError("inference runs on single-channel images")
    y = img.planes[0]
    for _ in range(passes if passes is not None else model.passes):
        y = infer_plane(y, model)
    if clip:
        y = np.clip(y, 0.0, 1.0)
    return img.with_planes(y[np.newaxis])


@dataclass
class TrainingAccumulator:
    """Streaming normal-equation terms, one block per bucket.

    gram[k] accumulates patch outer products for pixels selected into
    bucket k, moment[k] the patch-target products, count[k] the number of
    accumulated samples. Merging two accumulators is plain summation.
    """

    side: int
    quantizer: QuantizerSpec
    gram: np.ndarray = field(default=None, repr=False)
    moment: np.ndarray = field(default=None, repr=False)
    count: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.side < 1 or self.side % 2 == 0:
            raise InvalidInputError(f"footprint side must be odd and >= 1, got {self.side}")
        k, n = self.quantizer.bucket_count, self.side * self.side
        if self.gram is None:
            self.gram = np.zeros((k, n, n))
        if self.moment is None:
            self.moment = np.zeros((k, n))
        if self.count is None:
            self.count = np.zeros(k, dtype=np.int64)

    def merge(self, other: "TrainingAccumulator") -> "TrainingAccumulator":
        if other.side != self.side or other.quantizer != self.quantizer:
            raise InvalidInputError("cannot merge accumulators with different layouts")
        self.gram += other.gram
        self.moment += other.moment
        self.count += other.count
        return self


def dihedral_variants(a: np.ndarray):
    """The 8 rotation/flip variants of a plane, identity first."""
    out = []
    for k in range(4):
        r = np.rot90(a, k)
        out.append(r)
        out.append(r[:, ::-1])
    return out


def _accumulate_plane(acc, z, u, band_pixels=100_000, dtype=np.float64):
    side = acc.side
    r = side // 2
    h, w = z.shape
    n = side * side
    _, _, _, buckets = image_features(Image(z), acc.quantizer)
    padded = np.pad(z, r, mode="edge").astype(dtype)
    windows = sliding_window_view(padded, (side, side))  # (h, w, side, side)
    rows_per_band = max(1, band_pixels // w)
    for y0 in range(0, h, rows_per_band):
        y1 = min(y0 + rows_per_band, h)
        patches = windows[y0:y1].reshape(-1, n)
        flat = buckets[y0:y1].ravel()
        targets = u[y0:y1].ravel().astype(dtype)
        order = np.argsort(flat, kind="stable")
        sorted_flat = flat[order]
        uniq, starts = np.unique(sorted_flat, return_index=True)
        bounds = np.append(starts, sorted_flat.size)
        for k, s0, s1 in zip(uniq, bounds[:-1], bounds[1:]):
            sel = order[s0:s1]
            a_k = patches[sel]
            acc.gram[k] += (a_k.T @ a_k).astype(np.float64)
            acc.moment[k] += (a_k.T @ targets[sel]).astype(np.float64)
            acc.count[k] += s1 - s0


def accumulate(
    acc: TrainingAccumulator,
    input_img: Image,
    target_img: Image,
    quantizer: QuantizerSpec | None = None,
    augment: bool = True,
    dtype=np.float64,
) -> TrainingAccumulator:
    """Add one training pair to the accumulator.

    With ``augment`` (the default) the pair contributes all 8 rotation/flip
    variants, each bucketed on its own transformed features. ``dtype``
    controls the patch-product precision; float32 halves the matmul cost
    while the accumulators themselves stay float64.
    """
    if quantizer is not None and quantizer != acc.quantizer:
        raise InvalidInputError("quantizer does not match the accumulator")
    if input_img.channels != 1 or target_img.channels != 1:
        raise InvalidInputError("training pairs must be single-channel")
    if (input_img.height, input_img.width) != (target_img.height, target_img.width):
        raise InvalidInputError("input and target dimensions differ")
    z = input_img.planes[0]
    u = target_img.planes[0]
    if augment:
        for zv, uv in zip(dihedral_variants(z), dihedral_variants(u)):
            _accumulate_plane(
                acc, np.ascontiguousarray(zv), np.ascontiguousarray(uv), dtype=dtype
            )
    else:
        _accumulate_plane(acc, z, u, dtype=dtype)
    return acc


def build_regularizer(footprint, lam: float = 1.0) -> np.ndarray:
    """Smoothness penalty: lam * (Dx^T Dx + Dy^T Dy) over the tap grid.

    Forward differences between horizontally and vertically adjacent taps;
    constant filters live in the null space.
    """
    if isinstance(footprint, int):
        rows = cols = footprint
    else:
        rows, cols = footprint
    n = rows * cols
    q = np.zeros((n, n))
    for rr in range(rows):
        for cc in range(cols):
            i = rr * cols + cc
            for jj in ((rr, cc + 1), (rr + 1, cc)):
                if jj[0] < rows and jj[1] < cols:
                    j = jj[0] * cols + jj[1]
                    q[i, i] += 1.0
                    q[j, j] += 1.0
                    q[i, j] -= 1.0
                    q[j, i] -= 1.0
    return lam * q


def solve(
    acc: TrainingAccumulator,
    regularizer: np.ndarray | None = None,
    lam: float = DEFAULT_LAMBDA,
) -> np.ndarray:
    """Solve every bucket's regression: h = (Q_k + gram_k)^-1 moment_k.

    The smoothness penalty scales with the bucket's sample count so its
    relative weight is invariant to the amount of training data. Empty or
    ill-conditioned buckets fall back to the identity (centered delta)
    filter so untrained buckets are harmless.
    """
    n = acc.side * acc.side
    if regularizer is None:
        regularizer = build_regularizer(acc.side)
    if regularizer.shape != (n, n):
        raise InvalidInputError(f"regularizer must be ({n}, {n})")
    if not (np.isfinite(acc.gram).all() and np.isfinite(acc.moment).all()):
        raise NumericError("accumulator contains non-finite values")
    filters = np.empty((acc.quantizer.bucket_count, n))
    fallback = delta_filter(acc.side)
    for k in range(acc.quantizer.bucket_count):
        m = acc.count[k]
        if m == 0:
            filters[k] = fallback
            continue
        lhs = lam * float(m) * regularizer + acc.gram[k]
        if np.linalg.cond(lhs) > CONDITION_LIMIT:
            filters[k] = fallback
            continue
        try:
            filters[k] = _slinalg.solve(lhs, acc.moment[k], assume_a="pos")
        except np.linalg.LinAlgError:
            filters[k] = fallback
    return filters


# --- model file format -----------------------------------------------------
# little-endian: magic "BLD1", version u32, side u32, orientation/strength/
# coherence bin counts u32 x3, rho f64, pass count u32, strength thresholds
# f64 x (S-1), coherence thresholds f64 x (C-1), K*N f64 coefficients in
# bucket order, CRC32 (u32) of all preceding bytes.

_MAGIC = b"BLD1"
_VERSION = 1


def model_bytes(model: BladeModel) -> bytes:
    q = model.quantizer
    head = _MAGIC + struct.pack(
        "<IIIII",
        _VERSION,
        model.side,
        q.orientation_bins,
        q.strength_bins,
        q.coherence_bins,
    )
    head += struct.pack("<d", q.rho)
    head += struct.pack("<I", model.passes)
    body = np.asarray(q.strength_thresholds, dtype="<f8").tobytes()
    body += np.asarray(q.coherence_thresholds, dtype="<f8").tobytes()
    body += model.filters.astype("<f8").tobytes()
    payload = head + body
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def save_model(model: BladeModel, path) -> None:
    data = model_bytes(model)
    with open(path, "wb") as f:
        f.write(data)


def load_model(path) -> BladeModel:
    with open(path, "rb") as f:
        data = f.read()
    return model_from_bytes(data)


def model_from_bytes(data: bytes) -> BladeModel:
    if len(data) < 4 or data[:4] != _MAGIC:
        raise FormatError("not a filter bank file (bad magic)")
    if len(data) < 33:
        raise FormatError("truncated filter bank file")
    version, side, obins, sbins, cbins = struct.unpack_from("<IIIII", data, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    (rho,) = struct.unpack_from("<d", data, 24)
    (passes,) = struct.unpack_from("<I", data, 32)
    offset = 36
    k = obins * sbins * cbins
    n = side * side
    expected = offset + 8 * (sbins - 1) + 8 * (cbins - 1) + 8 * k * n + 4
    if len(data) != expected:
        raise FormatError(
            f"file length {len(data)} does not match header (expected {expected})"
        )
    crc_stored = struct.unpack_from("<I", data, len(data) - 4)[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc_stored:
        raise FormatError("checksum mismatch")
    st = np.frombuffer(data, dtype="<f8", count=sbins - 1, offset=offset)
    offset += 8 * (sbins - 1)
    ct = np.frombuffer(data, dtype="<f8", count=cbins - 1, offset=offset)
    offset += 8 * (cbins - 1)
    filters = np.frombuffer(data, dtype="<f8", count=k * n, offset=offset).reshape(k, n)
    quantizer = QuantizerSpec(obins, sbins, cbins, tuple(st), tuple(ct), rho)
    return BladeModel(side=side, quantizer=quantizer, filters=filters.copy(), passes=passes)


def render_collage(model: BladeModel, cell: int = 12, gap: int = 2) -> Image:
    """Heatmap table of the bank: columns by orientation bin, rows by the
    strength/coherence combination, each filter on a signed colormap
    centered at zero (positive red, negative blue)."""
    q = model.quantizer
    side = model.side
    cols = q.orientation_bins
    rows = q.strength_bins * q.coherence_bins
    tile_px = side * cell
    height = rows * tile_px + (rows + 1) * gap
    width = cols * tile_px + (cols + 1) * gap
    out = np.ones((3, height, width))
    for k in range(model.bucket_count):
        o = k % q.orientation_bins
        row = k // q.orientation_bins  # s + S*c
        h = model.filters[k].reshape(side, side)
        peak = np.abs(h).max()
        v = h / peak if peak > 0 else h
        big = np.kron(v, np.ones((cell, cell)))
        r = 1.0 - np.clip(-big, 0.0, 1.0)
        g = 1.0 - np.abs(big)
        b = 1.0 - np.clip(big, 0.0, 1.0)
        y0 = gap + row * (tile_px + gap)
        x0 = gap + o * (tile_px + gap)
        out[0, y0 : y0 + tile_px, x0 : x0 + tile_px] = r
        out[1, y0 : y0 + tile_px, x0 : x0 + tile_px] = g
        out[2, y0 : y0 + tile_px, x0 : x0 + tile_px] = b
    return Image(np.clip(out, 0.0, 1.0))
