"""Rasterize page geometry into 8-bit grayscale images.

Antialiased strokes use coverage from the distance to each polyline segment
(capsule footprint, so caps and joins come out round); the falloff band is
one pixel wide.  With antialiasing off, segments are stamped through a
Bresenham walk so width-1 lines hit an exact, testable pixel set.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .layout import PageGeometry, PageSpec, baselines_px


@dataclass(frozen=True, slots=True)
class RenderConfig:
    stroke_width_px: float = 2.2
    antialias: bool = True
    ruled_line_gray: int | None = None
    background_gray: int = 255

    def __post_init__(self):
        if self.stroke_width_px <= 0:
            raise ValueError("stroke_width_px must be positive")
        if not (0 <= self.background_gray <= 255):
            raise ValueError("background_gray must be an 8-bit intensity")
        if self.ruled_line_gray is not None and not (0 <= self.ruled_line_gray <= 255):
            raise ValueError("ruled_line_gray must be an 8-bit intensity")


@dataclass
class GrayscaleImage:
    """Row-major 8-bit image; 0 is ink, 255 is bare paper."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width), dtype uint8

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: Path) -> None:
        path.write_bytes(self.to_png_bytes())

    @classmethod
    def open(cls, path: Path) -> "GrayscaleImage":
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line walk covering all octants."""
    points = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def _accumulate_aa(cov: np.ndarray, ax, ay, bx, by, half_w: float) -> None:
    h, w = cov.shape
    pad = half_w + 1.0
    x0 = max(int(np.floor(min(ax, bx) - pad)), 0)
    x1 = min(int(np.ceil(max(ax, bx) + pad)), w - 1)
    y0 = max(int(np.floor(min(ay, by) - pad)), 0)
    y1 = min(int(np.ceil(max(ay, by) + pad)), h - 1)
    if x0 > x1 or y0 > y1:
        return
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = bx - ax
    dy = by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        dist = np.hypot(xs - ax, ys - ay)
    else:
        t = ((xs - ax) * dx + (ys - ay) * dy) / denom
        np.clip(t, 0.0, 1.0, out=t)
        dist = np.hypot(xs - (ax + t * dx), ys - (ay + t * dy))
    local = np.clip(0.5 + (half_w - dist), 0.0, 1.0)
    region = cov[y0 : y1 + 1, x0 : x1 + 1]
    np.maximum(region, local, out=region)


def _disc_offsets(half_w: float) -> np.ndarray:
    r = max(int(np.floor(half_w)), 0)
    if r == 0:
        return np.zeros((1, 2), dtype=np.int64)
    span = np.arange(-r, r + 1)
    oy, ox = np.meshgrid(span, span, indexing="ij")
    mask = ox * ox + oy * oy <= half_w * half_w
    return np.stack([oy[mask], ox[mask]], axis=1)


def _accumulate_hard(cov: np.ndarray, ax, ay, bx, by, offsets: np.ndarray) -> None:
    h, w = cov.shape
    base = np.asarray(
        bresenham(int(round(ax)), int(round(ay)), int(round(bx)), int(round(by))),
        dtype=np.int64,
    )
    pts = (base[:, None, ::-1] + offsets[None, :, :]).reshape(-1, 2)
    ys = pts[:, 0]
    xs = pts[:, 1]
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    cov[ys[keep], xs[keep]] = 1.0


def render_page(geom: PageGeometry, spec: PageSpec, cfg: RenderConfig) -> GrayscaleImage:
    """Render pen-down polylines over the page background, deterministically."""
    h, w = spec.height_px, spec.width_px
    base = np.full((h, w), cfg.background_gray, dtype=np.float64)
    if spec.has_ruled_lines and cfg.ruled_line_gray is not None:
        for by in baselines_px(spec):
            row = int(round(by))
            if 0 <= row < h:
                base[row, spec.margin_px : w - spec.margin_px] = cfg.ruled_line_gray

    cov = np.zeros((h, w), dtype=np.float64)
    half_w = cfg.stroke_width_px / 2.0
    offsets = None if cfg.antialias else _disc_offsets(half_w)
    for poly in geom.strokes:
        if not poly.pen_down or len(poly.points) < 2:
            continue
        pts = poly.points
        for a, b in zip(pts, pts[1:]):
            if cfg.antialias:
                _accumulate_aa(cov, a.x, a.y, b.x, b.y, half_w)
            else:
                _accumulate_hard(cov, a.x, a.y, b.x, b.y, offsets)

    out = np.rint((1.0 - cov) * base).astype(np.uint8)
    return GrayscaleImage(width=w, height=h, pixels=out)
