"""High-fidelity reference implementations of the slow, flow-based filters.

These serve two roles: standalone pipeline blocks, and target generators
when training fast filter-bank approximations. They are written for
correctness first; speed comes from the trained approximations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .image import Image
from .spatial_ops import smooth_plane
from .structure_tensor import _tensor_planes

MAX_STABLE_DT = 0.25
TV_EPS_REG = 1e-3

__all__ = [
    "FlowField",
    "tv_flow",
    "etf_field",
    "etf_smooth",
    "flow_xdog_response",
    "detail_control",
]


# --- total variation flow ---------------------------------------------------


def _tv_step(y: np.ndarray, dt: float, eps: float) -> np.ndarray:
    """One explicit step of curvature flow scaled by gradient magnitude.

    Discretization: unit fluxes dx/|grad| and dy/|grad| live on half-point
    edges (with the cross-derivative averaged onto the edge) and divergence
    differences adjacent fluxes; edge-replicated ghosts make the boundary
    zero-flux. The per-pixel step is limited so the update stays a convex
    combination of the pixel and its 4 neighbors, which enforces the
    discrete maximum principle exactly.
    """
    ypad = np.pad(y, 1, mode="edge")
    dx = ypad[1:-1, 1:] - ypad[1:-1, :-1]  # (H, W+1), zero at the borders
    dy = ypad[1:, 1:-1] - ypad[:-1, 1:-1]  # (H+1, W)
    dxc = 0.5 * (dx[:, :-1] + dx[:, 1:])  # centered horizontal derivative
    dyc = 0.5 * (dy[:-1, :] + dy[1:, :])  # centered vertical derivative
    dyc_pad = np.pad(dyc, ((0, 0), (1, 1)), mode="edge")
    dy_on_x = 0.5 * (dyc_pad[:, :-1] + dyc_pad[:, 1:])  # (H, W+1)
    dxc_pad = np.pad(dxc, ((1, 1), (0, 0)), mode="edge")
    dx_on_y = 0.5 * (dxc_pad[:-1, :] + dxc_pad[1:, :])  # (H+1, W)
    weight_x = 1.0 / np.sqrt(dx * dx + dy_on_x * dy_on_x + eps * eps)
    weight_y = 1.0 / np.sqrt(dy * dy + dx_on_y * dx_on_y + eps * eps)
    flux_x = dx * weight_x
    flux_y = dy * weight_y
    div = (flux_x[:, 1:] - flux_x[:, :-1]) + (flux_y[1:, :] - flux_y[:-1, :])
    grad_mag = np.hypot(dxc, dyc)
    # convexity limiter: coefficient mass drawn from the neighbors must not
    # exceed 1, otherwise the pixel could overshoot its neighborhood range
    coeff = dt * grad_mag * (
        weight_x[:, 1:] + weight_x[:, :-1] + weight_y[1:, :] + weight_y[:-1, :]
    )
    scale = np.where(coeff > 1.0, 1.0 / np.maximum(coeff, 1e-300), 1.0)
    return y + scale * dt * grad_mag * div


def tv_flow(img: Image, steps: int = 10, dt: float = 0.2, eps_reg: float = TV_EPS_REG) -> Image:
    """Edge-preserving flattening toward piecewise-constant regions.

    Explicit time stepping of du/dt = |grad u| div(grad u / |grad u|) with
    the division regularized by ``eps_reg``. Values stay inside the input's
    range (discrete maximum principle) and total variation is
    non-increasing per step.
    """
    if img.channels != 1:
        raise InvalidInputError("tv_flow runs on single-channel images")
    if steps < 0:
        raise InvalidInputError("steps must be >= 0")
    if not 0 < dt <= MAX_STABLE_DT:
        raise InvalidInputError(f"dt must be in (0, {MAX_STABLE_DT}] for stability, got {dt}")
    if eps_reg <= 0:
        raise InvalidInputError("eps_reg must be positive")
    y = img.planes[0]
    for _ in range(steps):
        y = _tv_step(y, dt, eps_reg)
    return img.with_planes(y[np.newaxis])


# --- edge tangent field and streamline smoothing ----------------------------


@dataclass(frozen=True)
class FlowField:
    """Per-pixel unit tangents along local edges (sign-ambiguous)."""

    tx: np.ndarray
    ty: np.ndarray


def etf_field(img: Image, rho: float = 2.0) -> FlowField:
    """Unit edge tangents: the weaker eigenvector of the smoothed tensor.

    Where gradient strength is negligible the tangent defaults to (1, 0).
    """
    if img.channels != 1:
        raise InvalidInputError("etf_field runs on single-channel images")
    a, b, c = _tensor_planes(img.planes[0], rho)
    phi = 0.5 * np.arctan2(2.0 * b, a - c)  # dominant eigenvector angle
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), b)
    strength = np.sqrt(np.maximum(mean + radius, 0.0))
    tx = np.where(strength < 1e-6, 1.0, -np.sin(phi))
    ty = np.where(strength < 1e-6, 0.0, np.cos(phi))
    return FlowField(tx=tx, ty=ty)


def _bilinear(plane: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    px = np.clip(px, 0.0, w - 1.0)
    py = np.clip(py, 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    tx = px - x0
    ty = py - y0
    top = plane[y0, x0] * (1 - tx) + plane[y0, x1] * tx
    bot = plane[y1, x0] * (1 - tx) + plane[y1, x1] * tx
    return top * (1 - ty) + bot * ty


def _sample_field_aligned(field: FlowField, px, py, ref_x, ref_y):
    """Bilinear field sample with each corner sign-aligned to a reference.

    Tangents are only defined up to sign; aligning before interpolation
    prevents opposite-signed neighbors from cancelling.
    """
    h, w = field.tx.shape
    pxc = np.clip(px, 0.0, w - 1.0)
    pyc = np.clip(py, 0.0, h - 1.0)
    x0 = np.floor(pxc).astype(np.int64)
    y0 = np.floor(pyc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = pxc - x0
    fy = pyc - y0
    vx = np.zeros_like(pxc)
    vy = np.zeros_like(pyc)
    for yy, xx, wgt in (
        (y0, x0, (1 - fx) * (1 - fy)),
        (y0, x1, fx * (1 - fy)),
        (y1, x0, (1 - fx) * fy),
        (y1, x1, fx * fy),
    ):
        cx = field.tx[yy, xx]
        cy = field.ty[yy, xx]
        sign = np.where(cx * ref_x + cy * ref_y < 0.0, -1.0, 1.0)
        vx += wgt * sign * cx
        vy += wgt * sign * cy
    norm = np.hypot(vx, vy)
    ok = norm > 1e-9
    vx = np.where(ok, vx / np.where(ok, norm, 1.0), ref_x)
    vy = np.where(ok, vy / np.where(ok, norm, 1.0), ref_y)
    return vx, vy


def _lic(y: np.ndarray, field: FlowField, length: float, sigma: float, step: float = 0.5):
    """Gaussian-weighted line integral convolution along field streamlines.

    Streamlines are traced with midpoint (second-order Runge-Kutta) steps in
    both directions; the tangent sign is resolved by continuity with the
    previous step direction.
    """
    h, w = y.shape
    base_y, base_x = np.mgrid[0:h, 0:w].astype(np.float64)
    acc = y.copy()  # center sample, weight 1
    wsum = np.ones_like(y)
    n_steps = int(np.floor(length / step + 1e-9))
    for direction in (1.0, -1.0):
        ref_x = direction * field.tx
        ref_y = direction * field.ty
        px = base_x.copy()
        py = base_y.copy()
        prev_x = ref_x.copy()
        prev_y = ref_y.copy()
        for k in range(1, n_steps + 1):
            v1x, v1y = _sample_field_aligned(field, px, py, prev_x, prev_y)
            mx = px + 0.5 * step * v1x
            my = py + 0.5 * step * v1y
            v2x, v2y = _sample_field_aligned(field, mx, my, v1x, v1y)
            px = np.clip(px + step * v2x, 0.0, w - 1.0)
            py = np.clip(py + step * v2y, 0.0, h - 1.0)
            prev_x, prev_y = v2x, v2y
            wgt = np.exp(-0.5 * (k * step / sigma) ** 2)
            acc += wgt * _bilinear(y, px, py)
            wsum += wgt
    return acc / wsum


def etf_smooth(img: Image, rho: float = 2.0, length: float = 6.0, passes: int = 1) -> Image:
    """Smooth along edges but not across them.

    Each pass recomputes the tangent field and convolves the image along
    its streamlines with a Gaussian profile (sigma = length / 3).
    """
    if img.channels != 1:
        raise InvalidInputError("etf_smooth runs on single-channel images")
    if length <= 0:
        raise InvalidInputError("length must be positive")
    if passes < 1:
        raise InvalidInputError("passes must be >= 1")
    y = img.planes[0]
    for _ in range(passes):
        field = etf_field(Image(y), rho)
        y = _lic(y, field, length, sigma=length / 3.0)
    return img.with_planes(y[np.newaxis])


# --- flow-guided high-emphasis edge response --------------------------------

DOG_RATIO = 1.6  # wide/narrow Gaussian std-dev ratio


def _line_kernel(sigma: float, radius: int) -> np.ndarray:
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def flow_xdog_response(
    img: Image,
    sigma: float,
    p: float,
    rho: float = 2.0,
    lic_length: float = 4.0,
) -> Image:
    """Edge response before thresholding: a 1-D high-emphasis filter of
    profile (1+p) G_{1.6 sigma} - p G_sigma applied across the local edge
    direction, then smoothed along the edge tangent streamlines.

    Thresholding is deliberately not applied here so it stays tunable
    downstream. Output is unclipped and can leave [0, 1].
    """
    if img.channels != 1:
        raise InvalidInputError("flow_xdog_response runs on single-channel images")
    if sigma <= 0:
        raise InvalidInputError("sigma must be positive")
    if p < 0:
        raise InvalidInputError("p must be >= 0")
    if lic_length < 0:
        raise InvalidInputError("lic_length must be >= 0")
    y = img.planes[0]
    h, w = y.shape
    field = etf_field(img, rho)
    # across-edge direction: perpendicular to the tangent
    nx = field.ty
    ny = -field.tx
    radius = int(np.ceil(3.0 * DOG_RATIO * sigma))
    wide = _line_kernel(DOG_RATIO * sigma, radius)
    narrow = _line_kernel(sigma, radius)
    kernel = (1.0 + p) * wide - p * narrow
    kernel /= kernel.sum()  # unit DC gain
    base_y, base_x = np.mgrid[0:h, 0:w].astype(np.float64)
    response = np.zeros_like(y)
    for t in range(-radius, radius + 1):
        if t == 0:
            response += kernel[radius] * y
        else:
            response += kernel[t + radius] * _bilinear(y, base_x + t * nx, base_y + t * ny)
    if lic_length > 0:
        response = _lic(response, field, lic_length, sigma=lic_length / 3.0)
    return Image(np.clip(response, -1e6, 1e6)[np.newaxis])


# --- detail control ----------------------------------------------------------


def detail_control(img: Image, delta: float, sigma_base: float = 3.0) -> Image:
    """Boost (delta > 0) or suppress (delta < 0) luma detail.

    out = clip((1 + d) u - d G_sigma u) with d = delta / 100, which adds the
    residual around a Gaussian base back onto the image. delta = -100
    reproduces the Gaussian base exactly; delta = 0 is the identity.
    """
    if not -100.0 <= delta <= 100.0:
        raise InvalidInputError(f"delta must be in [-100, 100], got {delta}")
    if sigma_base <= 0:
        raise InvalidInputError("sigma_base must be positive")
    d = delta / 100.0

    def enhance(y):
        base = smooth_plane(y, sigma_base)
        return np.clip((1.0 + d) * y - d * base, 0.0, 1.0)

    from .pixel_ops import _on_luma

    return _on_luma(img, enhance)


def detail_control_plane(y: np.ndarray, delta: float, sigma_base: float = 3.0) -> np.ndarray:
    """Unclipped single-plane variant used for training targets and tests."""
    d = delta / 100.0
    base = smooth_plane(y, sigma_base)
    return (1.0 + d) * y - d * base
