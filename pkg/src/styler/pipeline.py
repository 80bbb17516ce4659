"""Style pipelines: two ordered block lists, validation, execution, I/O.

A style is a background chain (color) and a foreground chain (line work).
The foreground result's luma becomes an alpha mask: white keeps the
background, black draws the line color. Styles serialize to a strict JSON
format (version "styler/1") with unknown keys rejected.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import pixel_ops, reference_filters, spatial_ops
from .blade import infer
from .errors import ConfigurationError, FormatError, InvalidInputError
from .image import Image, luma_chroma_to_rgb, resample, rgb_to_luma_chroma

STYLE_VERSION = "styler/1"
COMPOSITE_MODES = ("multiply", "foreground-only", "background-only")


@dataclass(frozen=True)
class BlockDescriptor:
    kind: str
    params: dict = field(default_factory=dict)
    enabled: bool = True


@dataclass(frozen=True)
class StylePipeline:
    name: str = ""
    background: tuple = ()
    foreground: tuple = ()
    composite_mode: str = "multiply"
    line_color: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "background", tuple(self.background))
        object.__setattr__(self, "foreground", tuple(self.foreground))
        object.__setattr__(self, "line_color", tuple(float(c) for c in self.line_color))


@dataclass(frozen=True)
class Diagnostic:
    layer: str  # "background" | "foreground" | "style"
    index: int  # block position, -1 for style-level issues
    code: str
    message: str

    def to_dict(self):
        return {
            "layer": self.layer,
            "index": self.index,
            "code": self.code,
            "message": self.message,
        }


# --- block registry ----------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    type: str  # "int" | "float" | "enum" | "model"
    default: object = None
    minimum: float | None = None
    maximum: float | None = None
    choices: tuple = ()

    def check(self, value):
        if self.type == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                return f"expected integer, got {value!r}"
            if self.minimum is not None and value < self.minimum:
                return f"{value} below minimum {self.minimum}"
            if self.maximum is not None and value > self.maximum:
                return f"{value} above maximum {self.maximum}"
        elif self.type == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"expected number, got {value!r}"
            if not math.isfinite(float(value)):
                return f"expected finite number, got {value!r}"
            if self.minimum is not None and value < self.minimum:
                return f"{value} below minimum {self.minimum}"
            if self.maximum is not None and value > self.maximum:
                return f"{value} above maximum {self.maximum}"
        elif self.type == "enum":
            if value not in self.choices:
                return f"{value!r} not one of {self.choices}"
        elif self.type == "model":
            if not isinstance(value, str):
                return f"model name must be a string, got {value!r}"
        return None


@dataclass(frozen=True)
class BlockInfo:
    kind: str
    params: dict  # name -> ParamSpec
    apply: object  # fn(img, params, models) -> Image
    requires_channels: int | None = None  # None = any
    requires_chroma: bool = False
    sets_channels: int | None = None  # None = unchanged
    stashes_chroma: bool = False  # converts color to gray, keeping chroma
    clears_chroma: bool = False
    description: str = ""


def _luma_wrapped(fn):
    """Run a single-plane filter on the luma of any image."""

    def apply(img, params, models):
        if img.channels == 1:
            return fn(img, params, models)
        yuv = rgb_to_luma_chroma(img)
        out = fn(Image(yuv.planes, yuv.chroma), params, models)
        clipped = Image(np.clip(out.planes, 0.0, 1.0), yuv.chroma)
        return luma_chroma_to_rgb(clipped)

    return apply


def _resolve_model(params, models):
    name = params.get("model", "")
    if not name:
        return None
    if models is None or name not in models:
        raise ConfigurationError(f"model {name!r} is not loaded")
    return models[name]


def _etf_apply(img, params, models):
    model = _resolve_model(params, models)
    passes = int(params.get("passes", 1))
    if model is not None:
        return infer(img, model, passes=passes, clip=True)
    return reference_filters.etf_smooth(
        img, rho=params.get("rho", 2.0), length=params.get("length", 6.0), passes=passes
    )


def _tvflow_apply(img, params, models):
    model = _resolve_model(params, models)
    if model is not None:
        return infer(img, model, clip=True)
    return reference_filters.tv_flow(
        img, steps=int(params.get("steps", 10)), dt=params.get("dt", 0.2)
    )


def _xdog_apply(img, params, models):
    model = _resolve_model(params, models)
    if model is not None:
        return infer(img, model, clip=False)
    return reference_filters.flow_xdog_response(
        img,
        sigma=params.get("sigma", 1.5),
        p=params.get("p", 10.0),
        rho=params.get("rho", 2.0),
        lic_length=params.get("lic_length", 4.0),
    )


def _detail_apply(img, params, models):
    model = _resolve_model(params, models)
    if model is not None:
        out = infer(img, model, clip=True)
        return out
    return Image(
        np.clip(
            reference_filters.detail_control_plane(
                img.planes[0], params.get("delta", -20.0), params.get("sigma_base", 3.0)
            ),
            0.0,
            1.0,
        )[np.newaxis],
        img.chroma,
    )


def _build_registry():
    registry = {}

    def block(kind, params, apply, **kw):
        registry[kind] = BlockInfo(kind=kind, params=params, apply=apply, **kw)

    block(
        "to_grayscale",
        {},
        lambda img, p, m: rgb_to_luma_chroma(img),
        requires_channels=3,
        sets_channels=1,
        stashes_chroma=True,
        description="Keep luma only; chroma is stashed for to_color.",
    )
    block(
        "to_color",
        {},
        lambda img, p, m: luma_chroma_to_rgb(img),
        requires_channels=1,
        requires_chroma=True,
        sets_channels=3,
        clears_chroma=True,
        description="Reassemble RGB from luma and stashed chroma.",
    )
    block(
        "posterize",
        {"levels": ParamSpec("int", 8, 2, 256)},
        lambda img, p, m: pixel_ops.posterize(img, int(p["levels"])),
        description="Quantize each channel to a few levels.",
    )
    block(
        "luma_posterize",
        {"levels": ParamSpec("int", 8, 2, 256)},
        lambda img, p, m: pixel_ops.luma_posterize(img, int(p["levels"])),
        description="Quantize luma only.",
    )
    block(
        "brightness",
        {"factor": ParamSpec("float", 1.0, 0.0, 10.0)},
        lambda img, p, m: pixel_ops.brightness(img, p["factor"]),
        description="Scale luma, clipping at white.",
    )
    block(
        "soft_threshold",
        {
            "phi": ParamSpec("float", 0.02, 0.001, 0.5),
            "epsilon": ParamSpec("float", 85.0, 0.0, 255.0),
        },
        lambda img, p, m: pixel_ops.soft_threshold(img, p["phi"], p["epsilon"]),
        description="Smooth binary cutoff in 0-255 units.",
    )
    block(
        "saturation",
        {"s": ParamSpec("float", 1.5, 0.0, 4.0)},
        lambda img, p, m: pixel_ops.saturate(img, p["s"]),
        requires_channels=3,
        description="Push colors away from gray.",
    )
    block(
        "hue",
        {
            "angle": ParamSpec("float", 0.0, -math.pi, math.pi),
            "bias_r": ParamSpec("float", 0.0, -1.0, 1.0),
            "bias_g": ParamSpec("float", 0.0, -1.0, 1.0),
            "bias_b": ParamSpec("float", 0.0, -1.0, 1.0),
        },
        lambda img, p, m: pixel_ops.hue(
            img, p["angle"], (p["bias_r"], p["bias_g"], p["bias_b"])
        ),
        requires_channels=3,
        description="Rotate chroma and add an RGB bias.",
    )
    block(
        "colorize",
        {
            "hue_deg": ParamSpec("float", 30.0, 0.0, 360.0),
            "sat": ParamSpec("float", 0.5, 0.0, 1.0),
            "lum_scale": ParamSpec("float", 1.0, 0.0, 4.0),
        },
        lambda img, p, m: pixel_ops.colorize(img, p["hue_deg"], p["sat"], p["lum_scale"]),
        sets_channels=3,
        clears_chroma=True,
        description="Monochrome tint from an HSL palette.",
    )
    block(
        "gaussian",
        {"sigma": ParamSpec("float", 2.0, 0.0, 25.0)},
        lambda img, p, m: spatial_ops.gaussian_blur(img, p["sigma"]),
        description="Isotropic blur.",
    )
    block(
        "sobel",
        {},
        lambda img, p, m: spatial_ops.sobel(img),
        sets_channels=1,
        stashes_chroma=True,
        description="Edge magnitude of the luma.",
    )
    block(
        "scale",
        {"percent": ParamSpec("float", 100.0, 5.0, 800.0)},
        lambda img, p, m: resample(img, p["percent"] / 100.0),
        description="Resize by a percentage (100 = identity).",
    )
    block(
        "pattern_fill",
        {},
        lambda img, p, m: spatial_ops.pattern_fill(img),
        sets_channels=1,
        stashes_chroma=True,
        description="Replace tone levels with hatching tiles.",
    )
    block(
        "halftone",
        {
            "cell": ParamSpec("int", 8, 2, 64),
            "mode": ParamSpec("enum", "gray", choices=("gray", "cmyk")),
        },
        lambda img, p, m: spatial_ops.halftone(img, int(p["cell"]), p["mode"]),
        sets_channels=None,  # handled specially in the state transform
        description="Variable-size dot screens.",
    )
    block(
        "etf",
        {
            "rho": ParamSpec("float", 2.0, 0.5, 10.0),
            "length": ParamSpec("float", 6.0, 1.0, 32.0),
            "passes": ParamSpec("int", 1, 1, 8),
            "model": ParamSpec("model", ""),
        },
        _luma_wrapped(_etf_apply),
        description="Smooth along edges (oil-paint flow).",
    )
    block(
        "tvflow",
        {
            "steps": ParamSpec("int", 10, 1, 200),
            "dt": ParamSpec("float", 0.2, 0.01, 0.25),
            "model": ParamSpec("model", ""),
        },
        _luma_wrapped(_tvflow_apply),
        description="Flatten toward piecewise-constant regions.",
    )
    block(
        "flow_xdog",
        {
            "sigma": ParamSpec("float", 1.5, 0.1, 8.0),
            "p": ParamSpec("float", 10.0, 0.0, 100.0),
            "rho": ParamSpec("float", 2.0, 0.5, 10.0),
            "lic_length": ParamSpec("float", 4.0, 0.0, 16.0),
            "model": ParamSpec("model", ""),
        },
        _luma_wrapped(_xdog_apply),
        description="Flow-guided edge emphasis (pre-threshold).",
    )
    block(
        "detail_control",
        {
            "delta": ParamSpec("float", -20.0, -100.0, 100.0),
            "sigma_base": ParamSpec("float", 3.0, 0.5, 10.0),
            "model": ParamSpec("model", ""),
        },
        _luma_wrapped(_detail_apply),
        description="Suppress or boost fine detail.",
    )
    block(
        "linear_equalize",
        {
            "low": ParamSpec("float", 5.0, 0.0, 100.0),
            "high": ParamSpec("float", 95.0, 0.0, 100.0),
        },
        lambda img, p, m: pixel_ops.linear_equalize(img, p["low"], p["high"]),
        description="Stretch luma percentiles to full range.",
    )
    block(
        "min_dynamic_range",
        {"dr": ParamSpec("float", 100.0, 1.0, 255.0)},
        lambda img, p, m: pixel_ops.min_dynamic_range(img, p["dr"]),
        description="Expand luma contrast when the histogram is too narrow.",
    )
    return registry


BLOCKS = _build_registry()


def blocks_schema():
    """JSON-friendly registry description for clients (parameter ranges)."""
    out = []
    for kind in sorted(BLOCKS):
        info = BLOCKS[kind]
        params = {}
        for name, spec in info.params.items():
            entry = {"type": spec.type, "default": spec.default}
            if spec.minimum is not None:
                entry["minimum"] = spec.minimum
            if spec.maximum is not None:
                entry["maximum"] = spec.maximum
            if spec.choices:
                entry["choices"] = list(spec.choices)
            params[name] = entry
        out.append(
            {
                "kind": kind,
                "description": info.description,
                "params": params,
                "requires_channels": info.requires_channels,
            }
        )
    return out


def fill_defaults(kind: str, params: dict) -> dict:
    full = {name: spec.default for name, spec in BLOCKS[kind].params.items()}
    full.update(params)
    return full


# --- validation ---------------------------------------------------------------


def _validate_layer(layer_name, blocks, diags):
    channels, has_chroma = 3, False
    for i, block in enumerate(blocks):
        if block.kind not in BLOCKS:
            diags.append(Diagnostic(layer_name, i, "unknown-block", f"no block {block.kind!r}"))
            continue
        info = BLOCKS[block.kind]
        for name, value in block.params.items():
            if name not in info.params:
                diags.append(
                    Diagnostic(layer_name, i, "unknown-param", f"{block.kind}: no param {name!r}")
                )
                continue
            problem = info.params[name].check(value)
            if problem:
                diags.append(
                    Diagnostic(
                        layer_name, i, "param-out-of-range", f"{block.kind}.{name}: {problem}"
                    )
                )
        if block.kind == "linear_equalize":
            p = fill_defaults(block.kind, block.params)
            if p["low"] >= p["high"]:
                diags.append(
                    Diagnostic(layer_name, i, "param-out-of-range", "low must be below high")
                )
        if not block.enabled:
            continue
        if info.requires_channels is not None and channels != info.requires_channels:
            diags.append(
                Diagnostic(
                    layer_name,
                    i,
                    "channel-mismatch",
                    f"{block.kind} needs {info.requires_channels}-channel input, chain has {channels}",
                )
            )
            continue
        if info.requires_chroma and not has_chroma:
            diags.append(
                Diagnostic(
                    layer_name,
                    i,
                    "missing-chroma",
                    f"{block.kind} needs stashed chroma (add to_grayscale upstream)",
                )
            )
            continue
        # state transform
        if block.kind == "halftone":
            p = fill_defaults(block.kind, block.params)
            if p["mode"] == "cmyk":
                if channels != 3:
                    diags.append(
                        Diagnostic(
                            layer_name, i, "channel-mismatch", "cmyk halftone needs color input"
                        )
                    )
            else:
                has_chroma = has_chroma or channels == 3
                channels = 1
            continue
        if info.stashes_chroma:
            has_chroma = has_chroma or channels == 3
        if info.clears_chroma:
            has_chroma = False
        if info.sets_channels is not None:
            channels = info.sets_channels


def validate(pipeline: StylePipeline) -> list:
    """Static checks; returns an empty list when the style is executable."""
    diags: list[Diagnostic] = []
    if pipeline.composite_mode not in COMPOSITE_MODES:
        diags.append(
            Diagnostic(
                "style", -1, "bad-composite", f"composite_mode must be one of {COMPOSITE_MODES}"
            )
        )
    if len(pipeline.line_color) != 3 or any(not 0 <= c <= 1 for c in pipeline.line_color):
        diags.append(
            Diagnostic("style", -1, "bad-line-color", "line_color must be 3 floats in [0,1]")
        )
    _validate_layer("background", pipeline.background, diags)
    _validate_layer("foreground", pipeline.foreground, diags)
    return diags


# --- execution ----------------------------------------------------------------


def _to_rgb(img: Image) -> Image:
    if img.channels == 3:
        return img
    return Image(np.repeat(img.planes, 3, axis=0))


def _run_chain(blocks, img: Image, models) -> Image:
    current = img
    for block in blocks:
        if not block.enabled:
            continue
        info = BLOCKS[block.kind]
        params = fill_defaults(block.kind, block.params)
        current = info.apply(current, params, models)
    return current


def execute(pipeline: StylePipeline, img: Image, models: dict | None = None) -> Image:
    """Render a style: background chain, foreground-as-alpha, composite.

    Deterministic for fixed inputs: same pipeline, image, and models give
    bitwise-identical output regardless of thread count.
    """
    diags = validate(pipeline)
    if diags:
        raise InvalidInputError(
            "style does not validate: " + "; ".join(d.message for d in diags)
        )
    if img.channels != 3:
        img = _to_rgb(img)
    background = _run_chain(pipeline.background, img, models)
    if pipeline.composite_mode == "background-only":
        return background
    if pipeline.foreground:
        fg = _run_chain(pipeline.foreground, img, models)
    else:
        fg = None
    if pipeline.composite_mode == "foreground-only":
        return _to_rgb(fg) if fg is not None else _to_rgb(img)
    bg_rgb = _to_rgb(background)
    if fg is None:
        return bg_rgb
    alpha = np.clip(fg.luma(), 0.0, 1.0)
    if alpha.shape != bg_rgb.planes.shape[1:]:
        # a scale block can leave the layers at different sizes; the line
        # layer follows the background's geometry
        from .image import _resize_plane

        alpha = _resize_plane(alpha, bg_rgb.height, bg_rgb.width)
    line = np.asarray(pipeline.line_color).reshape(3, 1, 1)
    out = bg_rgb.planes * alpha + line * (1.0 - alpha)
    return Image(np.clip(out, 0.0, 1.0))


# --- benchmarking ---------------------------------------------------------------


def benchmark(pipeline: StylePipeline, img: Image, repeats: int = 3, models=None) -> dict:
    """Per-block wall times (median over repeats) in megapixels per second."""
    if repeats < 1:
        raise InvalidInputError("repeats must be >= 1")
    diags = validate(pipeline)
    if diags:
        raise InvalidInputError("style does not validate")
    if img.channels != 3:
        img = _to_rgb(img)
    rows = []  # (layer, kind, [seconds...], pixels)
    totals = []
    for _ in range(repeats):
        t_total = time.perf_counter()
        run_rows = []
        outputs = {}
        for layer_name in ("background", "foreground"):
            blocks = getattr(pipeline, layer_name)
            if layer_name == "foreground" and not blocks:
                outputs[layer_name] = None
                continue
            current = img
            for i, block in enumerate(blocks):
                if not block.enabled:
                    continue
                info = BLOCKS[block.kind]
                params = fill_defaults(block.kind, block.params)
                pixels = current.width * current.height
                t0 = time.perf_counter()
                current = info.apply(current, params, models)
                run_rows.append((layer_name, i, block.kind, time.perf_counter() - t0, pixels))
            outputs[layer_name] = current
        t0 = time.perf_counter()
        bg = _to_rgb(outputs["background"]) if outputs["background"] is not None else img
        fg = outputs["foreground"]
        if pipeline.composite_mode == "multiply" and fg is not None:
            alpha = np.clip(fg.luma(), 0.0, 1.0)
            if alpha.shape == bg.planes.shape[1:]:
                line = np.asarray(pipeline.line_color).reshape(3, 1, 1)
                _ = np.clip(bg.planes * alpha + line * (1 - alpha), 0, 1)
        run_rows.append(("composite", -1, "composite", time.perf_counter() - t0, img.width * img.height))
        totals.append(time.perf_counter() - t_total)
        rows.append(run_rows)

    # median across repeats, matched by position
    n_rows = len(rows[0])
    report_rows = []
    for idx in range(n_rows):
        layer, i, kind, _, pixels = rows[0][idx]
        seconds = float(np.median([run[idx][3] for run in rows]))
        mps = (pixels / 1e6) / seconds if seconds > 0 else float("inf")
        report_rows.append(
            {
                "layer": layer,
                "index": i,
                "kind": kind,
                "seconds": seconds,
                "megapixels_per_second": mps,
            }
        )
    total = float(np.median(totals))
    return {
        "pixels": img.width * img.height,
        "repeats": repeats,
        "rows": report_rows,
        "total_seconds": total,
        "total_megapixels_per_second": (img.width * img.height / 1e6) / total if total > 0 else float("inf"),
    }


# --- serialization ---------------------------------------------------------------

_STYLE_KEYS = {"version", "name", "background", "foreground", "composite_mode", "line_color"}
_BLOCK_KEYS = {"kind", "params", "enabled"}


def style_to_dict(pipeline: StylePipeline) -> dict:
    def blocks(seq):
        return [
            {"kind": b.kind, "params": dict(b.params), "enabled": bool(b.enabled)} for b in seq
        ]

    return {
        "version": STYLE_VERSION,
        "name": pipeline.name,
        "background": blocks(pipeline.background),
        "foreground": blocks(pipeline.foreground),
        "composite_mode": pipeline.composite_mode,
        "line_color": list(pipeline.line_color),
    }


def style_from_dict(data) -> StylePipeline:
    if not isinstance(data, dict):
        raise FormatError("style must be a JSON object")
    unknown = set(data) - _STYLE_KEYS
    if unknown:
        raise FormatError(f"unknown style keys: {sorted(unknown)}")
    if data.get("version") != STYLE_VERSION:
        raise FormatError(f"unsupported style version {data.get('version')!r}")

    def blocks(seq, where):
        if not isinstance(seq, list):
            raise FormatError(f"{where} must be a list")
        out = []
        for i, raw in enumerate(seq):
            if not isinstance(raw, dict):
                raise FormatError(f"{where}[{i}] must be an object")
            unknown = set(raw) - _BLOCK_KEYS
            if unknown:
                raise FormatError(f"{where}[{i}] unknown keys: {sorted(unknown)}")
            if "kind" not in raw or not isinstance(raw["kind"], str):
                raise FormatError(f"{where}[{i}] needs a string 'kind'")
            params = raw.get("params", {})
            if not isinstance(params, dict):
                raise FormatError(f"{where}[{i}].params must be an object")
            out.append(
                BlockDescriptor(
                    kind=raw["kind"], params=dict(params), enabled=bool(raw.get("enabled", True))
                )
            )
        return tuple(out)

    line_color = data.get("line_color", [0.0, 0.0, 0.0])
    if not isinstance(line_color, list) or len(line_color) != 3:
        raise FormatError("line_color must be a list of 3 numbers")
    return StylePipeline(
        name=str(data.get("name", "")),
        background=blocks(data.get("background", []), "background"),
        foreground=blocks(data.get("foreground", []), "foreground"),
        composite_mode=data.get("composite_mode", "multiply"),
        line_color=tuple(line_color),
    )


def load_style(path) -> StylePipeline:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid style JSON: {e}") from e
    return style_from_dict(data)


def save_style(pipeline: StylePipeline, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(style_to_dict(pipeline), f, indent=2)
        f.write("\n")
