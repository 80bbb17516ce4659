import io
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from styler.image import read_png, resample, to_uint8, write_png
from styler.pipeline import style_to_dict, StylePipeline
from styler.presets import preset_dict, preset_names
from styler.server import create_app
from synth import synthetic_photo


@pytest.fixture
def client(tmp_path):
    imgdir = tmp_path / "images"
    imgdir.mkdir()
    write_png(synthetic_photo(1, 96, 128), imgdir / "photo.png")
    write_png(synthetic_photo(2, 64, 64), imgdir / "small.png")
    app = create_app(image_dir=imgdir, style_dir=tmp_path / "styles")
    with TestClient(app) as c:
        c.imgdir = imgdir
        yield c


def empty_style(name="empty"):
    return style_to_dict(StylePipeline(name=name))


class TestRegistryEndpoints:
    def test_blocks(self, client):
        r = client.get("/api/blocks")
        assert r.status_code == 200
        blocks = {b["kind"]: b for b in r.json()["blocks"]}
        assert "posterize" in blocks
        assert blocks["posterize"]["params"]["levels"]["minimum"] == 2

    def test_images(self, client):
        r = client.get("/api/images")
        assert r.status_code == 200
        assert r.json()["images"] == ["photo.png", "small.png"]

    def test_presets(self, client):
        r = client.get("/api/presets")
        assert r.status_code == 200
        presets = r.json()["presets"]
        assert set(presets) == set(preset_names())
        assert presets["sketch"] == preset_dict("sketch")


class TestStyleStore:
    def test_put_get_roundtrip(self, client):
        style = empty_style("mine")
        r = client.put("/api/styles/mine", json={"style": style})
        assert r.status_code == 200
        r = client.get("/api/styles/mine")
        assert r.status_code == 200
        assert r.json() == style
        assert "mine" in client.get("/api/styles").json()["styles"]

    def test_unknown_style_404(self, client):
        assert client.get("/api/styles/ghost").status_code == 404

    def test_delete_style(self, client):
        client.put("/api/styles/gone", json={"style": empty_style("gone")})
        assert client.delete("/api/styles/gone").status_code == 200
        assert client.get("/api/styles/gone").status_code == 404
        assert client.delete("/api/styles/gone").status_code == 404

    def test_put_rejects_malformed_style(self, client):
        r = client.put("/api/styles/bad", json={"style": {"version": "nope"}})
        assert r.status_code == 400


class TestValidateEndpoint:
    def test_clean_style(self, client):
        r = client.post("/api/validate", json={"style": empty_style()})
        assert r.status_code == 200
        assert r.json()["diagnostics"] == []

    def test_diagnostics_match_pipeline_validate(self, client):
        style = empty_style("bad")
        style["background"] = [
            {"kind": "to_grayscale", "params": {}, "enabled": True},
            {"kind": "saturation", "params": {"s": 1.5}, "enabled": True},
        ]
        r = client.post("/api/validate", json={"style": style})
        assert r.status_code == 200
        codes = [d["code"] for d in r.json()["diagnostics"]]
        assert "channel-mismatch" in codes

    def test_malformed_body_is_400(self, client):
        r = client.post(
            "/api/validate", content=b"{not json", headers={"content-type": "application/json"}
        )
        assert r.status_code == 400


class TestPreview:
    def test_empty_style_pixel_equal_downscaled(self, client):
        r = client.post(
            "/api/preview",
            json={"style": empty_style(), "image_id": "photo.png", "max_edge": 64},
        )
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        from PIL import Image as PILImage

        got = np.asarray(PILImage.open(io.BytesIO(r.content)))
        src = read_png(client.imgdir / "photo.png")
        expected = to_uint8(resample(src, 64 / 128))
        assert np.array_equal(got, expected)

    def test_small_image_not_upscaled(self, client):
        r = client.post(
            "/api/preview", json={"style": empty_style(), "image_id": "small.png"}
        )
        from PIL import Image as PILImage

        img = PILImage.open(io.BytesIO(r.content))
        assert img.size == (64, 64)

    def test_unknown_image_404(self, client):
        r = client.post(
            "/api/preview", json={"style": empty_style(), "image_id": "ghost.png"}
        )
        assert r.status_code == 404

    def test_invalid_block_422_with_diagnostics(self, client):
        style = empty_style()
        style["background"] = [{"kind": "nope", "params": {}, "enabled": True}]
        r = client.post("/api/preview", json={"style": style, "image_id": "photo.png"})
        assert r.status_code == 422
        assert any(d["code"] == "unknown-block" for d in r.json()["diagnostics"])

    def test_unparseable_style_400(self, client):
        r = client.post(
            "/api/preview",
            json={"style": {"version": "styler/1", "wat": 1}, "image_id": "photo.png"},
        )
        assert r.status_code == 400

    def test_unresolved_model_500(self, client):
        style = empty_style()
        style["background"] = [
            {"kind": "etf", "params": {"model": "missing"}, "enabled": True}
        ]
        r = client.post("/api/preview", json={"style": style, "image_id": "small.png"})
        assert r.status_code == 500

    def test_repeat_requests_byte_identical(self, client):
        body = {"style": preset_dict("sketch"), "image_id": "small.png", "max_edge": 48}
        a = client.post("/api/preview", json=body)
        b = client.post("/api/preview", json=body)
        assert a.status_code == b.status_code == 200
        assert a.content == b.content

    def test_concurrent_previews(self, client):
        body = {"style": empty_style(), "image_id": "photo.png", "max_edge": 48}

        def go(_):
            return client.post("/api/preview", json=body).content

        with ThreadPoolExecutor(4) as pool:
            results = list(pool.map(go, range(8)))
        assert all(r == results[0] for r in results)
