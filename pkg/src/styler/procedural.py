"""Rule-based random style generation and pluggable aesthetic scoring.

Generation is a pure function of the seed (a stable 64-bit PCG stream), so
the same seed reproduces the same style on any platform. Scoring runs an
external command per rendered image (the plugin protocol: the command gets
a PNG path and prints one float) or falls back to a built-in heuristic.
"""

from __future__ import annotations

import html
import json
import shlex
import subprocess
from pathlib import Path

import numpy as np

from .errors import ScoringError
from .image import Image, write_png
from .pipeline import BlockDescriptor, StylePipeline, execute, style_to_dict
from .spatial_ops import sobel

# blocks the generator may draw, with their parameter ranges
GRAYSCALE_PROBABILITY = 0.2
MIN_BLOCKS, MAX_BLOCKS = 4, 9
REPEATABLE = ("flow_xdog", "tvflow")

_PARAM_RANGES = {
    "flow_xdog": {"sigma": (0.5, 8.0), "p": (1.0, 40.0)},
    "tvflow": {},
    "soft_threshold": {"phi": (0.013, 0.059), "epsilon": (50.0, 110.0)},
    "detail_control": {"delta": (-100.0, 60.0)},
    "luma_posterize": {"levels": (5, 12)},
    "saturation": {"s": (1.5, 2.2)},
    "scale": {"percent": (100.0, 300.0)},
}


def _draw_block(kind: str, rng: np.random.Generator) -> BlockDescriptor:
    params = {}
    for name, (lo, hi) in _PARAM_RANGES[kind].items():
        if kind == "luma_posterize" and name == "levels":
            params[name] = int(rng.integers(lo, hi + 1))
        else:
            params[name] = float(rng.uniform(lo, hi))
    return BlockDescriptor(kind=kind, params=params)


def generate(seed: int) -> StylePipeline:
    """Sample a random style under the generation rules.

    4 to 9 blocks; parameters drawn uniformly from their ranges; grayscale
    conversion joins with 20% probability; only the edge-emphasis and
    flattening blocks may repeat. Color-only blocks are only drawn ahead of
    the grayscale conversion so every generated style validates.
    """
    rng = np.random.default_rng(seed)
    count = int(rng.integers(MIN_BLOCKS, MAX_BLOCKS + 1))
    include_gray = bool(rng.random() < GRAYSCALE_PROBABILITY)
    gray_position = int(rng.integers(0, count)) if include_gray else -1

    blocks = []
    used_once = set()
    for position in range(count):
        if position == gray_position:
            blocks.append(BlockDescriptor(kind="to_grayscale", params={}))
            continue
        pool = [k for k in _PARAM_RANGES if k in REPEATABLE or k not in used_once]
        if include_gray and position > gray_position:
            # the chain is single-channel from here on; color-only blocks
            # would fail validation
            pool = [k for k in pool if k != "saturation"]
        kind = pool[int(rng.integers(0, len(pool)))]
        used_once.add(kind)
        blocks.append(_draw_block(kind, rng))
    return StylePipeline(name=f"procedural-{seed}", background=tuple(blocks))


def builtin_score(img: Image) -> float:
    """Colorfulness plus edge density, mapped into [0, 10].

    Colorfulness follows the opponent-axis statistics heuristic; edge
    density is the mean edge magnitude. Both are squashed so typical
    photographs land mid-scale.
    """
    if img.channels == 3:
        r, g, b = img.planes
        rg = r - g
        yb = 0.5 * (r + g) - b
        colorfulness = np.hypot(rg.std(), yb.std()) + 0.3 * np.hypot(rg.mean(), yb.mean())
    else:
        colorfulness = 0.0
    edges = sobel(img).planes[0].mean()
    c_term = min(colorfulness / 0.3, 1.0)
    e_term = min(edges / 0.3, 1.0)
    return 10.0 * (0.5 * c_term + 0.5 * e_term)


def run_external_scorer(command: str, png_path) -> float:
    """Plugin protocol: command receives the PNG path, prints one float."""
    argv = shlex.split(command) + [str(png_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=120)
    except (OSError, subprocess.TimeoutExpired) as e:
        raise ScoringError(f"scorer failed to run: {e}") from e
    if proc.returncode != 0:
        raise ScoringError(f"scorer exited {proc.returncode}: {proc.stderr.strip()[:200]}")
    try:
        return float(proc.stdout.strip().split()[0])
    except (ValueError, IndexError) as e:
        raise ScoringError(f"scorer printed no number: {proc.stdout[:200]!r}") from e


def score(
    pipeline: StylePipeline,
    images,
    scorer: str | None = None,
    models=None,
    workdir=None,
) -> float:
    """Mean scorer output over the style rendered on each image."""
    import tempfile

    total = 0.0
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        for i, img in enumerate(images):
            rendered = execute(pipeline, img, models)
            if scorer:
                path = Path(tmp) / f"render_{i}.png"
                write_png(rendered, path)
                total += run_external_scorer(scorer, path)
            else:
                total += builtin_score(rendered)
    return total / len(images)


def contact_sheet(
    styles,
    img: Image,
    out_dir,
    scores=None,
    models=None,
    sort_by_score: bool = False,
) -> Path:
    """Render a static HTML report: one thumbnail per style with its score.

    Writes report.html, styles/*.json, and thumbs/*.png under ``out_dir``.
    """
    out = Path(out_dir)
    (out / "styles").mkdir(parents=True, exist_ok=True)
    (out / "thumbs").mkdir(parents=True, exist_ok=True)
    entries = []
    for i, style in enumerate(styles):
        name = style.name or f"style-{i}"
        s = scores[i] if scores is not None else None
        entries.append((i, name, style, s))
    if sort_by_score and scores is not None:
        entries.sort(key=lambda e: (-(e[3] if e[3] is not None else -np.inf), e[0]))

    rows = []
    for i, name, style, s in entries:
        style_file = out / "styles" / f"{name}.json"
        with open(style_file, "w", encoding="utf-8") as f:
            json.dump(style_to_dict(style), f, indent=2)
        thumb_file = out / "thumbs" / f"{name}.png"
        try:
            rendered = execute(style, img, models)
            write_png(rendered, thumb_file)
            err = None
        except Exception as e:  # surfaced per entry, batch continues
            err = str(e)
        score_text = "n/a" if s is None else f"{s:.3f}"
        cell = (
            f'<figure><img src="thumbs/{html.escape(name)}.png" alt="{html.escape(name)}">'
            if err is None
            else f"<figure><p>render failed: {html.escape(err)}</p>"
        )
        rows.append(
            f"{cell}<figcaption><a href=\"styles/{html.escape(name)}.json\">"
            f"{html.escape(name)}</a> (score {score_text})</figcaption></figure>"
        )
    doc = (
        "<!doctype html><meta charset=\"utf-8\"><title>style exploration</title>"
        "<style>body{font-family:sans-serif}figure{display:inline-block;margin:8px;"
        "text-align:center}img{max-width:240px;display:block}</style>\n"
        + "\n".join(rows)
        + "\n"
    )
    report = out / "report.html"
    report.write_text(doc, encoding="utf-8")
    return report
