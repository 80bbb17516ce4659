"""Local HTTP preview service backing the interactive editor.

Stateless request/response rendering: every preview re-executes the posted
style against the chosen image, downscaled to an interactive size. Models
are loaded once at startup and shared read-only across requests; the style
store is the only mutable state and takes a single-writer lock.

Status codes: 400 malformed style JSON, 404 unknown image or style,
422 style fails validation (body carries the diagnostics), 500 render
failure.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import blade
from .errors import FormatError, StylerError
from .image import png_bytes, read_png, resample
from .pipeline import blocks_schema, style_from_dict, style_to_dict, validate, execute
from .presets import preset_dict, preset_names

DEFAULT_MAX_EDGE = 720


class PreviewRequest(BaseModel):
    style: dict
    image_id: str
    max_edge: int = Field(default=DEFAULT_MAX_EDGE, ge=16, le=4096)


class ValidateRequest(BaseModel):
    style: dict


class DiagnosticModel(BaseModel):
    layer: str
    index: int
    code: str
    message: str


class ValidateResponse(BaseModel):
    diagnostics: list[DiagnosticModel]


class BlocksResponse(BaseModel):
    blocks: list[dict]


class ImagesResponse(BaseModel):
    images: list[str]


class StyleListResponse(BaseModel):
    styles: list[str]


class PresetsResponse(BaseModel):
    presets: dict[str, dict]


class _StyleStore:
    """Named styles, persisted to a directory when one is configured."""

    def __init__(self, directory: Path | None):
        self._dir = directory
        self._lock = threading.Lock()
        self._styles: dict[str, dict] = {}
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)
            for path in sorted(directory.glob("*.json")):
                try:
                    import json

                    self._styles[path.stem] = style_to_dict(
                        style_from_dict(json.loads(path.read_text()))
                    )
                except (FormatError, ValueError):
                    continue  # skip unreadable files, the store must come up

    def names(self):
        with self._lock:
            return sorted(self._styles)

    def get(self, name):
        with self._lock:
            return self._styles.get(name)

    def put(self, name, style_dict):
        with self._lock:
            self._styles[name] = style_dict
            if self._dir is not None:
                import json

                (self._dir / f"{name}.json").write_text(json.dumps(style_dict, indent=2))

    def delete(self, name) -> bool:
        with self._lock:
            if name not in self._styles:
                return False
            del self._styles[name]
            if self._dir is not None:
                (self._dir / f"{name}.json").unlink(missing_ok=True)
            return True


def create_app(
    image_dir,
    model_dir=None,
    style_dir=None,
    static_dir=None,
    max_edge_default: int = DEFAULT_MAX_EDGE,
) -> FastAPI:
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise FileNotFoundError(f"image directory {image_dir} does not exist")
    models = {}
    if model_dir is not None and Path(model_dir).is_dir():
        for path in sorted(Path(model_dir).glob("*.bld")):
            models[path.stem] = blade.load_model(path)
    store = _StyleStore(Path(style_dir) if style_dir else None)
    source_cache: dict = {}  # (image_id, max_edge, mtime) -> downscaled Image
    cache_lock = threading.Lock()

    app = FastAPI(title="styler preview service")

    def _source(image_id: str, max_edge: int):
        path = image_dir / image_id
        key = (image_id, max_edge, path.stat().st_mtime_ns)
        with cache_lock:
            cached = source_cache.get(key)
        if cached is not None:
            return cached
        img = read_png(path)
        longest = max(img.width, img.height)
        if longest > max_edge:
            img = resample(img, max_edge / longest)
        with cache_lock:
            if len(source_cache) >= 16:
                source_cache.clear()
            source_cache[key] = img
        return img

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request body"})

    def _image_ids():
        return sorted(p.name for p in image_dir.iterdir() if p.suffix.lower() == ".png")

    def _parse_style(raw: dict):
        try:
            return style_from_dict(raw)
        except FormatError as e:
            return JSONResponse(status_code=400, content={"error": str(e)})

    @app.get("/api/blocks", response_model=BlocksResponse)
    def get_blocks():
        return {"blocks": blocks_schema()}

    @app.get("/api/images", response_model=ImagesResponse)
    def get_images():
        return {"images": _image_ids()}

    @app.get("/api/styles", response_model=StyleListResponse)
    def list_styles():
        return {"styles": store.names()}

    @app.get("/api/styles/{name}")
    def get_style(name: str):
        style = store.get(name)
        if style is None:
            return JSONResponse(status_code=404, content={"error": f"no style {name!r}"})
        return style

    @app.put("/api/styles/{name}")
    def put_style(name: str, body: ValidateRequest):
        parsed = _parse_style(body.style)
        if isinstance(parsed, JSONResponse):
            return parsed
        store.put(name, style_to_dict(parsed))
        return {"saved": name}

    @app.delete("/api/styles/{name}")
    def delete_style(name: str):
        if not store.delete(name):
            return JSONResponse(status_code=404, content={"error": f"no style {name!r}"})
        return {"deleted": name}

    @app.get("/api/presets", response_model=PresetsResponse)
    def get_presets():
        return {"presets": {name: preset_dict(name) for name in preset_names()}}

    @app.post("/api/validate", response_model=ValidateResponse)
    def validate_style(body: ValidateRequest):
        parsed = _parse_style(body.style)
        if isinstance(parsed, JSONResponse):
            return parsed
        return {"diagnostics": [d.to_dict() for d in validate(parsed)]}

    @app.post("/api/preview")
    def preview(body: PreviewRequest):
        parsed = _parse_style(body.style)
        if isinstance(parsed, JSONResponse):
            return parsed
        if body.image_id not in _image_ids():
            return JSONResponse(
                status_code=404, content={"error": f"no image {body.image_id!r}"}
            )
        diags = validate(parsed)
        if diags:
            return JSONResponse(
                status_code=422, content={"diagnostics": [d.to_dict() for d in diags]}
            )
        img = _source(body.image_id, body.max_edge)
        try:
            rendered = execute(parsed, img, models)
        except StylerError as e:
            return JSONResponse(status_code=500, content={"error": str(e)})
        # low compression level: preview latency matters more than bytes
        return Response(content=png_bytes(rendered, compress_level=1), media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="editor")

    return app
