"""End-to-end training of fast filter-bank approximations.

For a chosen effect this module generates reference targets, derives
strength-bin thresholds from training-set quantiles, streams the training
pairs through the accumulator (with 8x rotation/flip augmentation), solves
the per-bucket regressions, and packages the result as a model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import reference_filters as ref
from .blade import BladeModel, TrainingAccumulator, accumulate, build_regularizer, solve
from .errors import InvalidInputError
from .image import Image
from .structure_tensor import QuantizerSpec, _tensor_planes, eigen_features


@dataclass(frozen=True)
class EffectDefaults:
    side: int
    orientation_bins: int
    strength_bins: int
    coherence_bins: int
    rho: float
    params: dict = field(default_factory=dict)


EFFECTS = {
    "etf": EffectDefaults(5, 24, 1, 3, 2.0, {"length": 6.0, "passes": 1}),
    "tvflow": EffectDefaults(7, 16, 4, 4, 2.0, {"steps": 10, "dt": 0.2}),
    "flowxdog": EffectDefaults(7, 16, 5, 3, 2.0, {"sigma": 1.5, "p": 10.0, "lic_length": 4.0}),
    "detail": EffectDefaults(9, 16, 5, 3, 2.0, {"delta": -20.0, "sigma_base": 3.0}),
}


def reference_apply(effect: str, img: Image, params: dict, rho: float = 2.0) -> Image:
    """Run the slow reference implementation of ``effect`` on a luma image."""
    if effect == "etf":
        return ref.etf_smooth(
            img, rho=rho, length=params.get("length", 6.0), passes=int(params.get("passes", 1))
        )
    if effect == "tvflow":
        return ref.tv_flow(img, steps=int(params.get("steps", 10)), dt=params.get("dt", 0.2))
    if effect == "flowxdog":
        return ref.flow_xdog_response(
            img,
            sigma=params.get("sigma", 1.5),
            p=params.get("p", 10.0),
            rho=rho,
            lic_length=params.get("lic_length", 4.0),
        )
    if effect == "detail":
        return Image(
            ref.detail_control_plane(
                img.planes[0], params.get("delta", -20.0), params.get("sigma_base", 3.0)
            )[np.newaxis]
        )
    raise InvalidInputError(f"unknown effect {effect!r}; choose from {sorted(EFFECTS)}")


def strength_quantile_thresholds(
    images, strength_bins: int, rho: float, subsample: int = 2
) -> tuple:
    """Equal-mass strength bin edges over the training images' features."""
    if strength_bins <= 1:
        return ()
    samples = []
    for img in images:
        a, b, c = _tensor_planes(img.planes[0], rho)
        _, strength, _ = eigen_features(a, b, c)
        samples.append(strength[::subsample, ::subsample].ravel())
    pool = np.concatenate(samples)
    qs = np.arange(1, strength_bins) / strength_bins
    thresholds = np.quantile(pool, qs)
    # strictly ascending edges are required; nudge ties apart
    for i in range(1, len(thresholds)):
        if thresholds[i] <= thresholds[i - 1]:
            thresholds[i] = thresholds[i - 1] + 1e-12
    return tuple(float(t) for t in thresholds)


def train_effect(
    effect: str,
    images,
    *,
    side: int | None = None,
    orientation_bins: int | None = None,
    strength_bins: int | None = None,
    coherence_bins: int | None = None,
    rho: float | None = None,
    lam: float | None = None,
    effect_params: dict | None = None,
    name: str = "",
    progress=None,
    dtype=np.float32,
) -> BladeModel:
    """Train a filter bank approximating ``effect`` on grayscale images.

    Targets come from the reference implementation; every pair contributes
    its 8 rotation/flip variants. Strength thresholds are frozen into the
    model so inference reproduces the training-time selection.
    """
    if effect not in EFFECTS:
        raise InvalidInputError(f"unknown effect {effect!r}; choose from {sorted(EFFECTS)}")
    if not images:
        raise InvalidInputError("need at least one training image")
    defaults = EFFECTS[effect]
    side = side or defaults.side
    obins = orientation_bins or defaults.orientation_bins
    sbins = strength_bins or defaults.strength_bins
    cbins = coherence_bins or defaults.coherence_bins
    rho = defaults.rho if rho is None else rho
    params = dict(defaults.params)
    params.update(effect_params or {})

    grays = []
    for img in images:
        grays.append(img if img.channels == 1 else Image(img.luma()[np.newaxis]))

    st = strength_quantile_thresholds(grays, sbins, rho)
    ct = tuple(i / cbins for i in range(1, cbins))
    quantizer = QuantizerSpec(obins, sbins, cbins, st, ct, rho)
    acc = TrainingAccumulator(side=side, quantizer=quantizer)
    for i, img in enumerate(grays):
        target = reference_apply(effect, img, params, rho)
        accumulate(acc, img, target, dtype=dtype)
        if progress:
            progress(f"accumulated {i + 1}/{len(grays)} images")
    filters = solve(acc, build_regularizer(side), lam=2.0**-10 if lam is None else lam)
    model = BladeModel(
        side=side,
        quantizer=quantizer,
        filters=filters,
        passes=1,
        name=name or f"{effect}",
        notes={"effect": effect, "params": params, "images": len(grays)},
    )
    return model
