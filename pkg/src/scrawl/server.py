"""Local HTTP service backing the glyph template editor.

JSON bodies mirror the template file schema.  Template writes are atomic
(write-temp-then-rename) and serialized behind a lock; the in-memory
database is the single source of truth between writes.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .layout import PageSpec, layout_text
from .raster import GrayscaleImage, RenderConfig, render_page
from .style import NS_LAYOUT, Rng, StyleConfig, sample_page_style
from .templates import (
    CharNotInDbError,
    GlyphTemplate,
    TemplateDB,
    TemplateParseError,
    db_to_doc,
    glyph_from_doc,
    glyph_to_doc,
    load_template_db,
    validate_glyph,
)

_PREVIEW_STROKE_FRACTION = 0.045  # nib width relative to x-height


class EditorState:
    def __init__(self, db: TemplateDB, db_path: Path):
        self.db = db
        self.db_path = db_path
        self.lock = threading.Lock()

    def save_glyph(self, glyph: GlyphTemplate) -> None:
        with self.lock:
            glyphs = dict(self.db.glyphs)
            variants = [g for g in glyphs.get(glyph.character, ()) if g.variant_id != glyph.variant_id]
            variants.append(glyph)
            variants.sort(key=lambda g: g.variant_id)
            glyphs[glyph.character] = tuple(variants)
            self.db = TemplateDB(glyphs=glyphs, charset=frozenset(glyphs))
            self._persist()

    def _persist(self) -> None:
        payload = json.dumps(db_to_doc(self.db), ensure_ascii=False, indent=1)
        fd, tmp = tempfile.mkstemp(dir=self.db_path.parent, prefix=".tmpdb", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, self.db_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _violation_response(violations) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={
            "error": "validation",
            "violations": [
                {"code": v.code, "message": v.message, "stroke": v.stroke, "node": v.node}
                for v in violations
            ],
        },
    )


def _error_response(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def _style_from_overrides(overrides: dict | None) -> StyleConfig:
    """Zero-noise config with single-value overrides from the request."""
    means: dict[str, float] = {}
    for key, value in (overrides or {}).items():
        if not isinstance(value, (int, float)):
            raise ValueError(f"style override {key!r} must be a number")
        means[key] = float(value)
    unknown = set(means) - set(StyleConfig.zero_noise().param_specs())
    if unknown:
        raise ValueError(f"unknown style overrides: {sorted(unknown)}")
    return StyleConfig.zero_noise(**means)


def _render_preview(db: TemplateDB, text: str, cfg: StyleConfig, seed: int, size_px: int) -> bytes:
    ppu = float(size_px)
    margin = max(int(ppu * 0.25), 8)
    width = 2 * margin + int(ppu * (1.8 * len(text) + 2.0))
    height = 2 * margin + int(ppu * 3.0)
    spec = PageSpec(
        width_px=width,
        height_px=height,
        margin_px=margin,
        line_height=2.8,
        px_per_unit=ppu,
    )
    params = sample_page_style(cfg, db, seed, 0)
    geom = layout_text(text, db, params, spec, Rng(seed).child(NS_LAYOUT, 0))
    image = render_page(
        geom, spec, RenderConfig(stroke_width_px=max(ppu * _PREVIEW_STROKE_FRACTION, 1.2))
    )
    return _crop_to_ink(image, pad=8).to_png_bytes()


def _crop_to_ink(image: GrayscaleImage, pad: int) -> GrayscaleImage:
    ink = np.argwhere(image.pixels < 250)
    if ink.size == 0:
        return image
    y0, x0 = ink.min(axis=0)
    y1, x1 = ink.max(axis=0)
    y0 = max(int(y0) - pad, 0)
    x0 = max(int(x0) - pad, 0)
    y1 = min(int(y1) + pad + 1, image.height)
    x1 = min(int(x1) + pad + 1, image.width)
    cropped = image.pixels[y0:y1, x0:x1]
    return GrayscaleImage(width=cropped.shape[1], height=cropped.shape[0], pixels=cropped)


def create_app(db_path: Path, ui_dir: Path | None = None) -> FastAPI:
    state = EditorState(load_template_db(db_path), db_path)
    app = FastAPI(title="scrawl template editor", docs_url=None, redoc_url=None)
    app.state.editor = state

    @app.get("/api/health")
    def health():
        n = sum(len(v) for v in state.db.glyphs.values())
        return {"status": "ok", "glyph_count": n}

    @app.get("/api/glyphs")
    def list_glyphs():
        return {
            "charset": sorted(state.db.charset),
            "variants": {ch: [g.variant_id for g in gs] for ch, gs in sorted(state.db.glyphs.items())},
        }

    @app.get("/api/glyphs/{char}")
    def get_glyphs(char: str):
        try:
            variants = state.db.variants(char)
        except CharNotInDbError as exc:
            return _error_response(404, exc.code, str(exc))
        return {"glyphs": [glyph_to_doc(g) for g in variants]}

    @app.put("/api/glyphs/{char}/{variant}")
    def put_glyph(char: str, variant: str, doc: dict = Body(...)):
        if doc.get("char") != char or doc.get("variant") != variant:
            return _error_response(422, "PATH_MISMATCH", "body char/variant must match the URL")
        try:
            glyph = glyph_from_doc(doc)
        except TemplateParseError as exc:
            return _error_response(422, "PARSE", str(exc))
        violations = validate_glyph(glyph)
        if violations:
            return _violation_response(violations)
        state.save_glyph(glyph)
        return {"saved": glyph_to_doc(glyph)}

    @app.post("/api/preview")
    def preview(payload: dict = Body(...)):
        doc = payload.get("glyph")
        if not isinstance(doc, dict):
            return _error_response(422, "BAD_REQUEST", "missing glyph document")
        try:
            glyph = glyph_from_doc(doc)
        except TemplateParseError as exc:
            return _error_response(422, "PARSE", str(exc))
        violations = validate_glyph(glyph)
        if violations:
            return _violation_response(violations)
        try:
            cfg = _style_from_overrides(payload.get("style"))
        except ValueError as exc:
            return _error_response(422, "BAD_STYLE", str(exc))
        tmp_db = TemplateDB.from_glyphs([glyph])
        seed = int(payload.get("seed", 0))
        size = int(payload.get("size_px", 96))
        png = _render_preview(tmp_db, glyph.character, cfg, seed, size)
        return Response(content=png, media_type="image/png")

    @app.post("/api/preview-text")
    def preview_text(payload: dict = Body(...)):
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            return _error_response(422, "BAD_REQUEST", "missing text")
        try:
            cfg = _style_from_overrides(payload.get("style"))
        except ValueError as exc:
            return _error_response(422, "BAD_STYLE", str(exc))
        seed = int(payload.get("seed", 0))
        size = int(payload.get("size_px", 48))
        try:
            png = _render_preview(state.db, text, cfg, seed, size)
        except CharNotInDbError as exc:
            return _error_response(422, exc.code, str(exc))
        return Response(content=png, media_type="image/png")

    if ui_dir is not None and ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
