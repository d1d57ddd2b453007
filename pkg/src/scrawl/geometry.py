"""Cubic Bezier primitives: evaluation, node chains, adaptive flattening.

Coordinates are glyph-local units (1.0 = nominal lowercase x-height) until
layout scales them to page pixels; y grows downward in both systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True, slots=True)
class Point2:
    """Immutable 2D point, also used for handle vectors."""

    x: float
    y: float

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "Point2":
        return Point2(-self.x, -self.y)

    def scaled(self, sx: float, sy: float | None = None) -> "Point2":
        if sy is None:
            sy = sx
        return Point2(self.x * sx, self.y * sy)

    def rotated(self, angle: float) -> "Point2":
        c, s = math.cos(angle), math.sin(angle)
        return Point2(self.x * c - self.y * s, self.x * s + self.y * c)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


# A handle vector has the same representation as a point.
Vec2 = Point2


class NodeFlag(str, Enum):
    """Behavioral flags a template node may carry."""

    DIRECTION_CHANGE = "direction_change"
    INTERRUPT_AFTER = "interrupt_after"
    CUTOFF_IF_MEDIAL = "cutoff_if_medial"


@dataclass(frozen=True, slots=True)
class ControlNode:
    """Template anchor: point ``p`` plus a single handle vector ``v``.

    One stored vector realizes the equal-and-opposite handle rule
    structurally: the outgoing handle is ``+v`` and the incoming handle is
    ``-v``.  A direction-change flag flips the incoming handle to ``+v``,
    which makes the pen reverse at the node (a cusp).
    """

    p: Point2
    v: Vec2
    flags: frozenset[NodeFlag] = frozenset()

    def flagged(self, flag: NodeFlag) -> bool:
        return flag in self.flags

    def moved(self, dx: float, dy: float) -> "ControlNode":
        return ControlNode(Point2(self.p.x + dx, self.p.y + dy), self.v, self.flags)


@dataclass(frozen=True, slots=True)
class CurveSegment:
    """One cubic Bezier span, defined by four ordered control points."""

    p1: Point2
    p2: Point2
    p3: Point2
    p4: Point2


@dataclass(slots=True)
class Polyline:
    """Piecewise-linear pen run. Only pen-down runs deposit ink."""

    points: list[Point2]
    pen_down: bool = True


def eval_cubic(seg: CurveSegment, t: float) -> Point2:
    """Evaluate the cubic at parameter ``t`` in [0, 1].

    Exact at the endpoints: t=0 returns p1, t=1 returns p4.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    u = 1.0 - t
    a = u * u * u
    b = 3.0 * u * u * t
    c = 3.0 * u * t * t
    d = t * t * t
    return Point2(
        a * seg.p1.x + b * seg.p2.x + c * seg.p3.x + d * seg.p4.x,
        a * seg.p1.y + b * seg.p2.y + c * seg.p3.y + d * seg.p4.y,
    )


def deriv_cubic(seg: CurveSegment, t: float) -> Vec2:
    """First derivative of the cubic with respect to ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    u = 1.0 - t
    return Point2(
        3.0 * u * u * (seg.p2.x - seg.p1.x)
        + 6.0 * u * t * (seg.p3.x - seg.p2.x)
        + 3.0 * t * t * (seg.p4.x - seg.p3.x),
        3.0 * u * u * (seg.p2.y - seg.p1.y)
        + 6.0 * u * t * (seg.p3.y - seg.p2.y)
        + 3.0 * t * t * (seg.p4.y - seg.p3.y),
    )


def segments_from_nodes(nodes: list[ControlNode]) -> list[CurveSegment]:
    """Build the Bezier segments joining consecutive control nodes.

    For a pair (a, b) the segment is (a.p, a.p + a.v, b.p - b.v, b.p); a
    direction-change flag on ``b`` uses ``b.p + b.v`` instead, producing a
    cusp.  An interrupt flag on a node suppresses every segment after it.
    """
    if len(nodes) < 2:
        raise ValueError("need at least 2 nodes to form a segment")
    segments: list[CurveSegment] = []
    for a, b in zip(nodes, nodes[1:]):
        if a.flagged(NodeFlag.INTERRUPT_AFTER):
            break
        in_handle = b.v if b.flagged(NodeFlag.DIRECTION_CHANGE) else -b.v
        segments.append(CurveSegment(a.p, a.p + a.v, b.p + in_handle, b.p))
    return segments


def _dist_to_chord(p: Point2, a: Point2, b: Point2) -> float:
    """Distance from ``p`` to the finite segment a-b."""
    dx, dy = b.x - a.x, b.y - a.y
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(p.x - a.x, p.y - a.y)
    t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / denom
    t = max(0.0, min(1.0, t))
    return math.hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy))


def _split(seg: CurveSegment) -> tuple[CurveSegment, CurveSegment]:
    """De Casteljau subdivision at t = 1/2."""

    def mid(a: Point2, b: Point2) -> Point2:
        return Point2((a.x + b.x) * 0.5, (a.y + b.y) * 0.5)

    ab = mid(seg.p1, seg.p2)
    bc = mid(seg.p2, seg.p3)
    cd = mid(seg.p3, seg.p4)
    abc = mid(ab, bc)
    bcd = mid(bc, cd)
    abcd = mid(abc, bcd)
    return (
        CurveSegment(seg.p1, ab, abc, abcd),
        CurveSegment(abcd, bcd, cd, seg.p4),
    )


def flatten(seg: CurveSegment, tolerance: float) -> Polyline:
    """Adaptively flatten a cubic into chords within ``tolerance``.

    Flatness test: the curve lies in the convex hull of its control points
    and distance-to-chord is convex, so if both interior control points are
    within ``tolerance`` of the chord p1-p4, every curve point is too.
    """
    if tolerance <= 0.0:
        raise ValueError("tolerance must be positive")
    points = [seg.p1]
    stack = [seg]
    while stack:
        cur = stack.pop()
        flat = (
            _dist_to_chord(cur.p2, cur.p1, cur.p4) <= tolerance
            and _dist_to_chord(cur.p3, cur.p1, cur.p4) <= tolerance
        )
        if flat:
            points.append(cur.p4)
        else:
            left, right = _split(cur)
            stack.append(right)
            stack.append(left)
    return Polyline(points=points, pen_down=True)
