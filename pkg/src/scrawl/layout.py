"""Compose glyph templates into page-coordinate pen strokes.

Responsibilities: variant selection, inter-letter joining, spacing with
guarded jitter, skew shear, width scaling, baseline drift with tanh soft
clipping, probabilistic letter disconnection, medial cutoff, greedy word
wrap, word bounding boxes and ground-truth bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import (
    ControlNode,
    NodeFlag,
    Point2,
    Polyline,
    flatten,
    segments_from_nodes,
)
from .style import Rng, StyleParams, perturb_node
from .templates import TemplateDB, pick_variant

# Vertical room reserved above/below the baseline, in glyph units.  Covers
# ascenders and the 1.6x uppercase fallback.
ASCENT_UNITS = 1.8
DESCENT_UNITS = 0.8

# Spacing jitter may pull a letter left by at most this fraction of the mean
# spacing, so letters never overlap their predecessor excessively.
OVERLAP_LIMIT_FRACTION = 0.3

# Base chord tolerance for flattening, in pixels (scaled by writing_speed).
BASE_FLATTEN_TOLERANCE_PX = 0.25


class PageOverflowError(Exception):
    """Text does not fit the page; the caller decides pagination."""


@dataclass(frozen=True, slots=True)
class PageSpec:
    width_px: int
    height_px: int
    margin_px: int = 48
    line_height: float = 2.6  # glyph units between consecutive baselines
    px_per_unit: float = 28.0
    has_ruled_lines: bool = False

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("page dimensions must be positive")
        if not (0 <= self.margin_px < min(self.width_px, self.height_px) / 2):
            raise ValueError("margin must be smaller than half of each page dimension")
        if self.px_per_unit <= 0 or self.line_height <= 0:
            raise ValueError("px_per_unit and line_height must be positive")


def baselines_px(spec: PageSpec) -> list[float]:
    """Baseline y positions usable on the page, top to bottom."""
    ppu = spec.px_per_unit
    y = spec.margin_px + ASCENT_UNITS * ppu
    out = []
    while y + DESCENT_UNITS * ppu <= spec.height_px - spec.margin_px:
        out.append(y)
        y += spec.line_height * ppu
    return out


@dataclass(frozen=True, slots=True)
class WordBox:
    text: str
    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True, slots=True)
class LetterSpan:
    """Diagnostic: which stroke indices belong to one laid-out letter."""

    char: str
    first_stroke: int
    n_strokes: int


@dataclass
class PageGeometry:
    strokes: list[Polyline]
    words: list[WordBox]
    ground_truth: str
    letter_spans: list[LetterSpan] = field(default_factory=list)


@dataclass(frozen=True, slots=True)
class DriftState:
    current_drift: float = 0.0


def soft_clip(raw: float, limit: float) -> float:
    """tanh soft clipping: smooth saturation strictly inside (-limit, limit)."""
    if limit <= 0.0:
        return 0.0
    return limit * math.tanh(raw / limit)


def drift_step(state: DriftState, params: StyleParams, rng: Rng) -> DriftState:
    """Advance the baseline wander by one character.

    The accumulated value is re-clipped through tanh each step, so moving
    further out gets progressively harder and |drift| < y_delta_max always.
    """
    if params.y_delta_max <= 0.0:
        return DriftState(0.0)
    raw = state.current_drift + rng.normal(params.y_delta_speed)
    return DriftState(soft_clip(raw, params.y_delta_max))


def negative_overlap_guard(prev_advance: float, sampled_delta: float) -> float:
    """Clamp a spacing delta from below at -30% of the mean advance."""
    return max(sampled_delta, -OVERLAP_LIMIT_FRACTION * prev_advance)


@dataclass
class _GlyphInstance:
    """One letter prepared for placement: noised nodes in origin-relative px."""

    char: str
    main: list[list[ControlNode]]
    aux: list[list[ControlNode]]
    advance_px: float
    rng: Rng
    disconnect: bool
    advance_delta: float  # glyph units, already guarded

    @property
    def entry_node(self) -> ControlNode | None:
        return self.main[0][0] if self.main and self.main[0] else None

    @property
    def exit_node(self) -> ControlNode | None:
        return self.main[-1][-1] if self.main and self.main[-1] else None

    @property
    def exit_interrupts(self) -> bool:
        node = self.exit_node
        return node is not None and node.flagged(NodeFlag.INTERRUPT_AFTER)


def _shear(node: ControlNode, tan_skew: float) -> ControlNode:
    p = Point2(node.p.x - node.p.y * tan_skew, node.p.y)
    v = Point2(node.v.x - node.v.y * tan_skew, node.v.y)
    return ControlNode(p, v, node.flags)


def _scale_node(node: ControlNode, sx: float, sy: float) -> ControlNode:
    return ControlNode(node.p.scaled(sx, sy), node.v.scaled(sx, sy), node.flags)


def _build_instance(
    ch: str,
    db: TemplateDB,
    params: StyleParams,
    ppu: float,
    rng: Rng,
    medial: bool,
) -> _GlyphInstance:
    key, case_scale = db.lookup(ch)
    tpl = pick_variant(db, key, params.variant_assignment)
    sx = params.width_scale * case_scale
    sy = case_scale
    tan_skew = math.tan(params.skew_angle)

    # Fixed draw order per glyph stream: disconnect, spacing delta, aux
    # sizes, node noise, then (at placement time) the drift step.
    disconnect = rng.random() < params.symbol_disconnect_prob
    delta = negative_overlap_guard(params.char_distance, rng.normal(params.char_distance_std))
    aux_sizes = [
        params.point_size_scale * (1.0 + rng.normal(params.point_size_std))
        for _ in tpl.aux_strokes
    ]

    def finish(node: ControlNode) -> ControlNode:
        node = perturb_node(node, params, rng)
        node = _shear(node, tan_skew)
        return _scale_node(node, ppu, ppu)

    main: list[list[ControlNode]] = []
    for stroke in tpl.strokes:
        main.append([finish(_scale_node(n, sx, sy)) for n in stroke])
    aux: list[list[ControlNode]] = []
    for stroke, size in zip(tpl.aux_strokes, aux_sizes):
        scaled = [_scale_node(n, sx, sy) for n in stroke]
        cx = sum(n.p.x for n in scaled) / len(scaled)
        cy = sum(n.p.y for n in scaled) / len(scaled)
        resized = [
            ControlNode(
                Point2(cx + (n.p.x - cx) * size, cy + (n.p.y - cy) * size),
                n.v.scaled(size),
                n.flags,
            )
            for n in scaled
        ]
        aux.append([finish(n) for n in resized])

    if medial and main and main[-1] and main[-1][-1].flagged(NodeFlag.CUTOFF_IF_MEDIAL):
        main[-1] = main[-1][:-1]

    return _GlyphInstance(
        char=ch,
        main=main,
        aux=aux,
        advance_px=tpl.advance_width * sx * ppu,
        rng=rng,
        disconnect=disconnect,
        advance_delta=delta,
    )


def _stroke_polyline(nodes: list[ControlNode], tolerance: float) -> Polyline | None:
    if len(nodes) < 2:
        return None
    points: list[Point2] = []
    for seg in segments_from_nodes(nodes):
        chord = flatten(seg, tolerance).points
        if points:
            chord = chord[1:]
        points.extend(chord)
    deduped: list[Point2] = []
    for p in points:
        if not deduped or p != deduped[-1]:
            deduped.append(p)
    if len(deduped) < 2:
        return None
    return Polyline(points=deduped, pen_down=True)


def _translated(nodes: list[ControlNode], dx: float, dy: float) -> list[ControlNode]:
    return [n.moved(dx, dy) for n in nodes]


class _BoxTracker:
    def __init__(self):
        self.min_x = math.inf
        self.min_y = math.inf
        self.max_x = -math.inf
        self.max_y = -math.inf

    def add(self, poly: Polyline) -> None:
        for p in poly.points:
            if p.x < self.min_x:
                self.min_x = p.x
            if p.x > self.max_x:
                self.max_x = p.x
            if p.y < self.min_y:
                self.min_y = p.y
            if p.y > self.max_y:
                self.max_y = p.y

    def box(self, text: str) -> WordBox | None:
        if not math.isfinite(self.min_x):
            return None
        x0 = math.floor(self.min_x)
        y0 = math.floor(self.min_y)
        x1 = max(math.ceil(self.max_x), x0 + 1)
        y1 = max(math.ceil(self.max_y), y0 + 1)
        return WordBox(text, x0, y0, x1 - x0, y1 - y0)


def layout_text(
    text: str,
    db: TemplateDB,
    params: StyleParams,
    spec: PageSpec,
    rng: Rng,
) -> PageGeometry:
    """Lay out ``text`` as pen polylines in page pixel coordinates.

    Pure: identical arguments produce identical geometry.  Raises
    CharNotInDbError for unsupported characters and PageOverflowError when
    the text exceeds page capacity.
    """
    source_lines = [line.split() for line in text.split("\n")]
    ground_truth = " ".join(w for line in source_lines for w in line)

    ppu = spec.px_per_unit
    tolerance = BASE_FLATTEN_TOLERANCE_PX * max(params.writing_speed, 0.1)
    baselines = baselines_px(spec)
    usable_right = spec.width_px - spec.margin_px
    usable_width = usable_right - spec.margin_px

    strokes: list[Polyline] = []
    words: list[WordBox] = []
    letter_spans: list[LetterSpan] = []

    line_no = 0
    pen_x = float(spec.margin_px)
    drift = DriftState(0.0)
    glyph_idx = 0

    gap_px = params.disconnect_gap * ppu

    def ensure_line() -> float:
        if line_no >= len(baselines):
            raise PageOverflowError(f"text exceeds page capacity at line {line_no}")
        return baselines[line_no]

    for li, line_words in enumerate(source_lines):
        if li > 0:
            line_no += 1
            pen_x = float(spec.margin_px)
        for wi, word in enumerate(line_words):
            if wi > 0:
                # Inter-word space: its own glyph stream and drift step.
                srng = rng.child(glyph_idx)
                glyph_idx += 1
                sdelta = negative_overlap_guard(
                    params.space_distance, srng.normal(params.space_distance_std)
                )
                pen_x += (params.space_distance + sdelta) * ppu
                drift = drift_step(drift, params, srng)

            insts = [
                _build_instance(ch, db, params, ppu, rng.child(glyph_idx + k), medial=k < len(word) - 1)
                for k, ch in enumerate(word)
            ]
            glyph_idx += len(word)

            # Ink width for the wrap decision (advance-based).
            offsets = []
            x = 0.0
            prev = None
            for k, inst in enumerate(insts):
                if k > 0 and (
                    inst.disconnect
                    or prev.exit_interrupts
                    or not (inst.char.isalpha() and prev.char.isalpha())
                ):
                    x += gap_px
                offsets.append(x)
                x += inst.advance_px + (params.char_distance + inst.advance_delta) * ppu
                prev = inst
            ink_width = (offsets[-1] + insts[-1].advance_px) if insts else 0.0

            if ink_width > usable_width:
                raise PageOverflowError(f"word {word!r} wider than a line")
            if pen_x > spec.margin_px and pen_x + ink_width > usable_right:
                line_no += 1
                pen_x = float(spec.margin_px)
            baseline = ensure_line()

            tracker = _BoxTracker()
            prev_inst = None
            prev_exit_abs: ControlNode | None = None
            for k, inst in enumerate(insts):
                drift = drift_step(drift, params, inst.rng)
                x0 = pen_x + offsets[k]
                y0 = baseline + drift.current_drift * ppu
                placed_main = [_translated(s, x0, y0) for s in inst.main]
                placed_aux = [_translated(s, x0, y0) for s in inst.aux]

                connected = (
                    k > 0
                    and not inst.disconnect
                    and prev_inst is not None
                    and not prev_inst.exit_interrupts
                    and inst.char.isalpha()
                    and prev_inst.char.isalpha()
                    and prev_exit_abs is not None
                )
                entry = placed_main[0][0] if placed_main and placed_main[0] else None
                if connected and entry is not None:
                    bridge = _stroke_polyline([prev_exit_abs, entry], tolerance)
                    if bridge is not None:
                        strokes.append(bridge)
                        tracker.add(bridge)

                first_stroke = len(strokes)
                for nodes in placed_main + placed_aux:
                    poly = _stroke_polyline(nodes, tolerance)
                    if poly is not None:
                        strokes.append(poly)
                        tracker.add(poly)
                letter_spans.append(LetterSpan(inst.char, first_stroke, len(strokes) - first_stroke))

                prev_inst = inst
                prev_exit_abs = (
                    placed_main[-1][-1] if placed_main and placed_main[-1] else None
                )

            box = tracker.box(word)
            if box is not None:
                words.append(box)
            # x accumulated every letter advance plus trailing spacing.
            pen_x += x

    return PageGeometry(
        strokes=strokes,
        words=words,
        ground_truth=ground_truth,
        letter_spans=letter_spans,
    )
