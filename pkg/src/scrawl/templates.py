"""Glyph template data model, JSON template-database format, validation.

The on-disk format is versioned UTF-8 JSON::

    {
      "version": 1,
      "charset": ["о", "а", ...],
      "glyphs": [
        {
          "char": "о",
          "variant": "v0",
          "advance": 0.62,
          "strokes": [[{"p": [x, y], "v": [dx, dy], "flags": ["..."]}, ...]],
          "aux": [[...]]
        }
      ]
    }

Field names are normative.  Coordinates are glyph units: baseline at y=0,
x-height spans y in [-1, 0], y grows downward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

from .geometry import ControlNode, NodeFlag, Point2, Vec2

FORMAT_VERSION = 1

# Scale applied when an uppercase character falls back to its lowercase
# template (no dedicated uppercase variant in the database).
UPPERCASE_FALLBACK_SCALE = 1.6


class TemplateError(Exception):
    """Base class for template loading/lookup failures."""


class TemplateParseError(TemplateError):
    """Malformed template JSON; carries a human-readable position."""


class TemplateValidationError(TemplateError):
    def __init__(self, glyph_id: str, violations: list["Violation"]):
        self.glyph_id = glyph_id
        self.violations = violations
        codes = ", ".join(v.code for v in violations)
        super().__init__(f"glyph {glyph_id}: {codes}")


class CharNotInDbError(TemplateError):
    """Requested character has no template. Carries the character."""

    code = "CHAR_NOT_IN_DB"

    def __init__(self, char: str):
        self.char = char
        super().__init__(f"character {char!r} not in template database")


@dataclass(frozen=True, slots=True)
class Violation:
    """One validation failure with a machine-readable code."""

    code: str
    message: str
    stroke: int | None = None
    node: int | None = None


@dataclass(frozen=True, slots=True)
class GlyphTemplate:
    """One writing variant of a character.

    ``strokes`` is the main pen skeleton; ``aux_strokes`` hold diacritic-like
    parts (dots, hooks, hats) that are noised and size-scaled independently.
    The entry node is the first node of the first main stroke and the exit
    node is the last node of the last main stroke; both are derived, not
    stored.
    """

    character: str
    variant_id: str
    strokes: tuple[tuple[ControlNode, ...], ...]
    aux_strokes: tuple[tuple[ControlNode, ...], ...] = ()
    advance_width: float = 0.6

    @property
    def glyph_id(self) -> str:
        return f"{self.character}/{self.variant_id}"

    @property
    def entry_node(self) -> ControlNode:
        return self.strokes[0][0]

    @property
    def exit_node(self) -> ControlNode:
        return self.strokes[-1][-1]


@dataclass(frozen=True)
class TemplateDB:
    """Immutable collection of glyph templates keyed by character."""

    glyphs: dict[str, tuple[GlyphTemplate, ...]]
    charset: frozenset[str]

    @classmethod
    def from_glyphs(cls, glyphs: list[GlyphTemplate]) -> "TemplateDB":
        by_char: dict[str, list[GlyphTemplate]] = {}
        for g in glyphs:
            by_char.setdefault(g.character, []).append(g)
        return cls(
            glyphs={ch: tuple(gs) for ch, gs in by_char.items()},
            charset=frozenset(by_char),
        )

    def variants(self, ch: str) -> tuple[GlyphTemplate, ...]:
        try:
            return self.glyphs[ch]
        except KeyError:
            raise CharNotInDbError(ch) from None

    def supports(self, ch: str) -> bool:
        """True if ``ch`` renders directly or via the uppercase fallback."""
        return ch in self.glyphs or (ch != ch.lower() and ch.lower() in self.glyphs)

    def lookup(self, ch: str) -> tuple[str, float]:
        """Resolve ``ch`` to a template key and geometric scale factor."""
        if ch in self.glyphs:
            return ch, 1.0
        low = ch.lower()
        if ch != low and low in self.glyphs:
            return low, UPPERCASE_FALLBACK_SCALE
        raise CharNotInDbError(ch)

    def renderable_charset(self) -> frozenset[str]:
        """Charset plus uppercase counterparts reachable via fallback."""
        extra = {c.upper() for c in self.charset if c.upper() != c and len(c.upper()) == 1}
        return self.charset | frozenset(extra)


def pick_variant(db: TemplateDB, ch: str, assignment: dict[str, str]) -> GlyphTemplate:
    """Return the variant of ``ch`` fixed by ``assignment``. Never samples."""
    candidates = db.variants(ch)
    try:
        wanted = assignment[ch]
    except KeyError:
        raise TemplateError(f"no variant assigned for character {ch!r}") from None
    for g in candidates:
        if g.variant_id == wanted:
            return g
    raise TemplateError(f"character {ch!r} has no variant {wanted!r}")


def validate_glyph(g: GlyphTemplate) -> list[Violation]:
    """Check all structural invariants; violations are data, not errors."""
    out: list[Violation] = []
    if len(g.character) != 1:
        out.append(Violation("BAD_CHARACTER", "character must be a single unicode scalar"))
    if not g.variant_id:
        out.append(Violation("BAD_VARIANT_ID", "variant id must be non-empty"))
    if not (g.advance_width > 0):
        out.append(Violation("BAD_ADVANCE", f"advance must be positive, got {g.advance_width}"))
    if not g.strokes:
        out.append(Violation("EMPTY_GLYPH", "glyph has no main strokes"))

    def check_stroke(si: int, stroke: tuple[ControlNode, ...], aux: bool) -> None:
        label = "aux stroke" if aux else "stroke"
        stroke_idx = si if not aux else si + len(g.strokes)
        if len(stroke) < 2:
            out.append(
                Violation("STROKE_TOO_SHORT", f"{label} {si} has {len(stroke)} node(s), need >=2", stroke_idx)
            )
        for ni, node in enumerate(stroke):
            if not (node.p.is_finite() and node.v.is_finite()):
                out.append(Violation("NONFINITE_COORD", f"{label} {si} node {ni} not finite", stroke_idx, ni))
                continue
            terminus = ni == 0 or ni == len(stroke) - 1
            if not terminus and node.v.norm() == 0.0:
                out.append(
                    Violation(
                        "ZERO_HANDLE_INTERIOR",
                        f"{label} {si} node {ni} is interior but has a zero handle",
                        stroke_idx,
                        ni,
                    )
                )
            if node.flagged(NodeFlag.CUTOFF_IF_MEDIAL):
                is_exit = (
                    not aux
                    and si == len(g.strokes) - 1
                    and ni == len(stroke) - 1
                )
                if not is_exit:
                    out.append(
                        Violation(
                            "CUTOFF_NOT_ON_EXIT",
                            f"cutoff flag allowed only on the exit node, found on {label} {si} node {ni}",
                            stroke_idx,
                            ni,
                        )
                    )

    for si, stroke in enumerate(g.strokes):
        check_stroke(si, stroke, aux=False)
    for si, stroke in enumerate(g.aux_strokes):
        check_stroke(si, stroke, aux=True)
    return out


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _node_from_doc(doc: Any, where: str) -> ControlNode:
    if not isinstance(doc, dict):
        raise TemplateParseError(f"{where}: node must be an object")
    try:
        px, py = doc["p"]
        vx, vy = doc["v"]
    except (KeyError, TypeError, ValueError) as exc:
        raise TemplateParseError(f"{where}: node needs 'p' and 'v' two-element arrays") from exc
    flags = set()
    for name in doc.get("flags", []):
        try:
            flags.add(NodeFlag(name))
        except ValueError:
            raise TemplateParseError(f"{where}: unknown flag {name!r}") from None
    return ControlNode(Point2(float(px), float(py)), Vec2(float(vx), float(vy)), frozenset(flags))


def _stroke_list(docs: Any, where: str) -> tuple[tuple[ControlNode, ...], ...]:
    if not isinstance(docs, list):
        raise TemplateParseError(f"{where}: strokes must be a list of node lists")
    strokes = []
    for si, stroke_doc in enumerate(docs):
        if not isinstance(stroke_doc, list):
            raise TemplateParseError(f"{where}[{si}]: stroke must be a list of nodes")
        strokes.append(
            tuple(_node_from_doc(nd, f"{where}[{si}][{ni}]") for ni, nd in enumerate(stroke_doc))
        )
    return tuple(strokes)


def glyph_from_doc(doc: dict) -> GlyphTemplate:
    """Parse one glyph document (the same schema the editor API uses)."""
    if not isinstance(doc, dict):
        raise TemplateParseError("glyph entry must be an object")
    try:
        char = doc["char"]
        variant = doc["variant"]
    except KeyError as exc:
        raise TemplateParseError(f"glyph entry missing field {exc}") from None
    where = f"glyph {char!r}/{variant!r}"
    return GlyphTemplate(
        character=str(char),
        variant_id=str(variant),
        strokes=_stroke_list(doc.get("strokes", []), where),
        aux_strokes=_stroke_list(doc.get("aux", []), where),
        advance_width=float(doc.get("advance", 0.6)),
    )


def _node_to_doc(node: ControlNode) -> dict:
    doc: dict[str, Any] = {"p": [node.p.x, node.p.y], "v": [node.v.x, node.v.y]}
    if node.flags:
        doc["flags"] = sorted(f.value for f in node.flags)
    return doc


def glyph_to_doc(g: GlyphTemplate) -> dict:
    return {
        "char": g.character,
        "variant": g.variant_id,
        "advance": g.advance_width,
        "strokes": [[_node_to_doc(n) for n in s] for s in g.strokes],
        "aux": [[_node_to_doc(n) for n in s] for s in g.aux_strokes],
    }


def db_to_doc(db: TemplateDB) -> dict:
    glyphs = []
    for ch in sorted(db.glyphs):
        for g in db.glyphs[ch]:
            glyphs.append(glyph_to_doc(g))
    return {"version": FORMAT_VERSION, "charset": sorted(db.charset), "glyphs": glyphs}


def load_template_db(source: bytes | str | Path | IO) -> TemplateDB:
    """Load and fully validate a template database.

    Rejects rather than repairs: any malformed or invalid glyph raises with
    the glyph id and the violated rule.
    """
    if isinstance(source, Path):
        raw = source.read_bytes()
    elif isinstance(source, (bytes, str)):
        raw = source
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise TemplateParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc

    if not isinstance(doc, dict):
        raise TemplateParseError("top level must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        raise TemplateParseError(f"unsupported template format version {version!r}")
    glyph_docs = doc.get("glyphs", [])
    if not glyph_docs:
        raise TemplateParseError("empty database: no glyphs")

    glyphs = []
    seen: set[tuple[str, str]] = set()
    for gd in glyph_docs:
        g = glyph_from_doc(gd)
        violations = validate_glyph(g)
        if violations:
            raise TemplateValidationError(g.glyph_id, violations)
        key = (g.character, g.variant_id)
        if key in seen:
            raise TemplateValidationError(g.glyph_id, [Violation("DUPLICATE_VARIANT", "variant id reused")])
        seen.add(key)
        glyphs.append(g)

    db = TemplateDB.from_glyphs(glyphs)
    declared = doc.get("charset")
    if declared is not None:
        missing = set(declared) - set(db.glyphs)
        if missing:
            raise TemplateParseError(f"charset declares characters with no glyphs: {sorted(missing)}")
    return db


def save_template_db(db: TemplateDB, path: Path) -> None:
    path.write_text(json.dumps(db_to_doc(db), ensure_ascii=False, indent=1), encoding="utf-8")
