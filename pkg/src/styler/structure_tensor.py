"""Per-pixel edge features and quantized filter selection.

The local 2x2 structure tensor is built from finite differences on a 2x2
stencil in 45-degree rotated coordinates (the smallest stencil whose two
gradient components are mutually aligned), rotated back, smoothed with a
Gaussian of std dev rho, and eigen-decomposed into an (orientation,
strength, coherence) triple per pixel. Quantizing the triple yields the
bucket index that selects one filter from a trained bank.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .image import Image
from .spatial_ops import smooth_plane

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class FeatureTriple:
    """Edge features at one pixel."""

    orientation: float  # radians, wraps mod pi
    strength: float  # sqrt of dominant eigenvalue, >= 0
    coherence: float  # anisotropy in [0, 1]


@dataclass(frozen=True)
class QuantizerSpec:
    """Bin layout mapping feature triples to bucket indices.

    Orientation bins are uniform over [0, pi). Strength and coherence use
    explicit ascending threshold arrays (strength is unbounded, so its
    edges come from training-set quantiles). A value exactly at a threshold
    goes to the upper bin.
    """

    orientation_bins: int
    strength_bins: int
    coherence_bins: int
    strength_thresholds: tuple = field(default=())
    coherence_thresholds: tuple = field(default=())
    rho: float = 2.0

    def __post_init__(self):
        for name, bins in (
            ("orientation_bins", self.orientation_bins),
            ("strength_bins", self.strength_bins),
            ("coherence_bins", self.coherence_bins),
        ):
            if bins < 1:
                raise InvalidInputError(f"{name} must be >= 1, got {bins}")
        st = tuple(float(t) for t in self.strength_thresholds)
        ct = tuple(float(t) for t in self.coherence_thresholds)
        if len(st) != self.strength_bins - 1:
            raise InvalidInputError(
                f"need {self.strength_bins - 1} strength thresholds, got {len(st)}"
            )
        if len(ct) != self.coherence_bins - 1:
            raise InvalidInputError(
                f"need {self.coherence_bins - 1} coherence thresholds, got {len(ct)}"
            )
        for arr, name in ((st, "strength"), (ct, "coherence")):
            if any(b <= a for a, b in zip(arr, arr[1:])):
                raise InvalidInputError(f"{name} thresholds must be strictly ascending")
        object.__setattr__(self, "strength_thresholds", st)
        object.__setattr__(self, "coherence_thresholds", ct)
        if self.rho < 0:
            raise InvalidInputError(f"rho must be >= 0, got {self.rho}")

    @property
    def bucket_count(self) -> int:
        return self.orientation_bins * self.strength_bins * self.coherence_bins

    @classmethod
    def with_uniform_thresholds(
        cls, orientation_bins, strength_bins, coherence_bins, rho=2.0, strength_max=0.25
    ) -> "QuantizerSpec":
        """Uniform coherence bins on [0,1]; strength bins uniform on
        [0, strength_max] as a stand-in until training supplies quantiles."""
        st = tuple(strength_max * i / strength_bins for i in range(1, strength_bins))
        ct = tuple(i / coherence_bins for i in range(1, coherence_bins))
        return cls(orientation_bins, strength_bins, coherence_bins, st, ct, rho)


def rotated_gradients(img: Image):
    """Finite differences over a 2x2 stencil in 45-degree rotated coords.

    Returns two full-size planes; samples live on the half-pixel grid with
    (height-1) x (width-1) valid entries, edge-replicated to full size.
    """
    if img.channels != 1:
        raise InvalidInputError("rotated_gradients requires a single-channel image")
    if img.height < 2 or img.width < 2:
        raise InvalidInputError("image must be at least 2x2")
    g1, g2 = _half_grid_gradients(img.planes[0])
    return _pad_to_full(g1), _pad_to_full(g2)


def _half_grid_gradients(y: np.ndarray):
    """Valid-region rotated derivative samples, shape (H-1, W-1)."""
    g1 = (y[:-1, 1:] - y[1:, :-1]) / SQRT2  # right minus down
    g2 = (y[1:, 1:] - y[:-1, :-1]) / SQRT2  # down-right minus here
    return g1, g2


def _pad_to_full(valid: np.ndarray) -> np.ndarray:
    return np.pad(valid, ((0, 1), (0, 1)), mode="edge")


def _half_to_centers(valid: np.ndarray) -> np.ndarray:
    """Average the four half-grid samples surrounding each pixel center."""
    p = np.pad(valid, ((1, 1), (1, 1)), mode="edge")
    return 0.25 * (p[:-1, :-1] + p[:-1, 1:] + p[1:, :-1] + p[1:, 1:])


def smoothed_tensor(img: Image, rho: float):
    """Gaussian-smoothed structure tensor components (a, b, c) per pixel.

    a = G_rho * gx^2, b = G_rho * gx gy, c = G_rho * gy^2, with the rotated
    stencil gradients expressed back in unrotated coordinates before the
    outer products. Returns three (H, W) planes.
    """
    if img.channels != 1:
        raise InvalidInputError("smoothed_tensor requires a single-channel image")
    if rho < 0:
        raise InvalidInputError(f"rho must be >= 0, got {rho}")
    return _tensor_planes(img.planes[0], rho)


def _tensor_planes(y: np.ndarray, rho: float):
    h, w = y.shape
    if h < 2 or w < 2:
        z = np.zeros((h, w))
        return z, z.copy(), z.copy()
    g1, g2 = _half_grid_gradients(y)
    gx = (g1 + g2) / SQRT2
    gy = (g2 - g1) / SQRT2
    a = _half_to_centers(gx * gx)
    b = _half_to_centers(gx * gy)
    c = _half_to_centers(gy * gy)
    if rho > 0:
        a = smooth_plane(a, rho)
        b = smooth_plane(b, rho)
        c = smooth_plane(c, rho)
    return a, b, c


def eigen_features(a, b, c):
    """Eigen-decompose tensors into (orientation, strength, coherence).

    Accepts scalars or planes. Orientation is the dominant eigenvector's
    angle mod pi; both eigenvalues clamp at zero; a fully degenerate tensor
    yields the (0, 0, 0) triple.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    mean = 0.5 * (a + c)
    half_diff = 0.5 * (a - c)
    radius = np.hypot(half_diff, b)
    lam1 = np.maximum(mean + radius, 0.0)
    lam2 = np.maximum(mean - radius, 0.0)
    orientation = np.mod(0.5 * np.arctan2(2.0 * b, a - c), np.pi)
    s1 = np.sqrt(lam1)
    s2 = np.sqrt(lam2)
    total = s1 + s2
    coherence = np.where(total > 0.0, (s1 - s2) / np.where(total > 0, total, 1.0), 0.0)
    return orientation, s1, coherence


def select_bucket(f: FeatureTriple, q: QuantizerSpec) -> int:
    """Bucket index o + O*(s + S*c) for one feature triple."""
    planes = select_bucket_planes(
        np.array([[f.orientation]]), np.array([[f.strength]]), np.array([[f.coherence]]), q
    )
    return int(planes[0, 0])


def select_bucket_planes(orientation, strength, coherence, q: QuantizerSpec) -> np.ndarray:
    """Vectorized bucket selection over feature planes."""
    o_bins = q.orientation_bins
    o = np.floor(np.asarray(orientation) / np.pi * o_bins).astype(np.int64) % o_bins
    s = np.searchsorted(np.array(q.strength_thresholds), np.asarray(strength), side="right")
    c = np.searchsorted(np.array(q.coherence_thresholds), np.asarray(coherence), side="right")
    return o + o_bins * (s + q.strength_bins * c)


def image_features(img: Image, q: QuantizerSpec):
    """Full selection pipeline: tensor -> features -> bucket plane.

    Returns (orientation, strength, coherence, buckets) planes for the
    stage input image. Images smaller than the stencil get the degenerate
    zero-feature triple everywhere.

    Processing runs over row bands with a halo wide enough to cover the
    full stencil-plus-smoothing support, so every value is bit-identical
    to a whole-image computation while the working set stays cache-sized.
    """
    y = img.planes[0] if img.channels == 1 else img.luma()
    h, w = y.shape
    halo = int(np.ceil(3.0 * q.rho)) + 2  # gradient + centering + smoothing
    band_rows = max(32, 196_608 // max(w, 1))
    orientation = np.empty((h, w))
    strength = np.empty((h, w))
    coherence = np.empty((h, w))
    buckets = np.empty((h, w), dtype=np.int64)
    st = np.array(q.strength_thresholds)
    ct = np.array(q.coherence_thresholds)
    o_bins = q.orientation_bins
    for y0 in range(0, h, band_rows):
        y1 = min(y0 + band_rows, h)
        s0 = max(0, y0 - halo)
        s1 = min(h, y1 + halo)
        a, b, c = _tensor_planes(y[s0:s1], q.rho)
        rows = slice(y0 - s0, y1 - s0)
        ob, sb, cb = eigen_features(a[rows], b[rows], c[rows])
        orientation[y0:y1] = ob
        strength[y0:y1] = sb
        coherence[y0:y1] = cb
        idx = np.floor(ob / np.pi * o_bins).astype(np.int64) % o_bins
        idx += o_bins * np.searchsorted(st, sb, side="right")
        idx += o_bins * q.strength_bins * np.searchsorted(ct, cb, side="right")
        buckets[y0:y1] = idx
    return orientation, strength, coherence, buckets
