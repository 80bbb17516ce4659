"""Access to the style files shipped with the package."""

from __future__ import annotations

import json
from importlib import resources

from .pipeline import StylePipeline, style_from_dict


def preset_names() -> list[str]:
    files = resources.files("styler") / "styles"
    return sorted(p.name[: -len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> StylePipeline:
    files = resources.files("styler") / "styles"
    path = files / f"{name}.json"
    with path.open("r", encoding="utf-8") as f:
        return style_from_dict(json.load(f))


def preset_dict(name: str) -> dict:
    files = resources.files("styler") / "styles"
    with (files / f"{name}.json").open("r", encoding="utf-8") as f:
        return json.load(f)
