"""Corpus ingestion and batch dataset generation.

Sentence splitting: terminator punctuation ( . ! ? … ) followed by
whitespace ends a sentence, except after a short list of Russian
abbreviations.  Sentences keep their terminators; internal whitespace is
normalized to single spaces.  Anything containing a character outside the
allowed set is dropped and counted in the rejection report.
"""

from __future__ import annotations

import json
import re
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable

from .layout import PageGeometry, PageOverflowError, PageSpec, baselines_px, layout_text
from .raster import RenderConfig, render_page
from .style import NS_LAYOUT, Rng, StyleConfig, sample_page_style
from .templates import TemplateDB

DEFAULT_PUNCTUATION = frozenset(".,!?…—-:;«»()")

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?…])\s+")
_ABBREVIATIONS = ("т.", "д.", "п.", "г.", "гг.", "см.", "им.", "др.", "руб.", "тыс.")


class CorpusError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class Sentence:
    text: str
    source_id: str
    char_count: int


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)

    @property
    def ingested(self) -> int:
        return self.accepted + self.rejected


@dataclass
class IngestResult:
    sentences: list[Sentence]
    report: IngestReport


def _split_sentences(text: str) -> list[str]:
    pieces = _SENTENCE_SPLIT.split(text)
    merged: list[str] = []
    for piece in pieces:
        if merged and merged[-1].lower().endswith(_ABBREVIATIONS):
            merged[-1] = merged[-1] + " " + piece
        else:
            merged.append(piece)
    return merged


def ingest(
    sources: Iterable[tuple[str, bytes | str] | bytes | str | IO],
    charset: frozenset[str] | set[str],
    punctuation: frozenset[str] = DEFAULT_PUNCTUATION,
) -> IngestResult:
    """Split raw documents into filtered sentences.

    ``sources`` items may be (source_id, payload) pairs, raw bytes/str, or
    file-like objects.  Bytes must be valid UTF-8; decode errors propagate
    with their byte offset.
    """
    allowed = frozenset(charset) | punctuation | {" "}
    sentences: list[Sentence] = []
    report = IngestReport()
    for idx, item in enumerate(sources):
        if isinstance(item, tuple):
            source_id, payload = item
        else:
            source_id = getattr(item, "name", f"source{idx}")
            payload = item
        if hasattr(payload, "read"):
            payload = payload.read()
        if isinstance(payload, bytes):
            payload = payload.decode("utf-8")

        for raw in _split_sentences(payload):
            text = " ".join(raw.split())
            if not text:
                continue
            if not any(c.isalpha() for c in text):
                report.rejected += 1
                report.reasons["no_letters"] += 1
                continue
            bad = {c for c in text if c not in allowed}
            if bad:
                report.rejected += 1
                report.reasons["charset"] += 1
                continue
            report.accepted += 1
            sentences.append(Sentence(text=text, source_id=str(source_id), char_count=len(text)))
    return IngestResult(sentences=sentences, report=report)


def ingest_dir(path: Path, charset, punctuation: frozenset[str] = DEFAULT_PUNCTUATION) -> IngestResult:
    """Ingest every *.txt file under ``path`` (one document per file)."""
    files = sorted(path.glob("*.txt"))
    if not files:
        raise CorpusError(f"no .txt documents in {path}")
    return ingest(((f.name, f.read_bytes()) for f in files), charset, punctuation)


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    image_path: str
    ground_truth: str
    style_seed: int
    page_index: int
    word_boxes: tuple[dict, ...]

    def to_json(self) -> dict:
        return {
            "image_path": self.image_path,
            "ground_truth": self.ground_truth,
            "style_seed": self.style_seed,
            "page_index": self.page_index,
            "word_boxes": list(self.word_boxes),
        }


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    def write_jsonl(self, path: Path) -> None:
        with path.open("w", encoding="utf-8") as fh:
            for entry in self.entries:
                fh.write(json.dumps(entry.to_json(), ensure_ascii=False) + "\n")

    @classmethod
    def read_jsonl(cls, path: Path) -> "DatasetManifest":
        entries = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                doc = json.loads(line)
                entries.append(
                    ManifestEntry(
                        image_path=doc["image_path"],
                        ground_truth=doc["ground_truth"],
                        style_seed=doc["style_seed"],
                        page_index=doc["page_index"],
                        word_boxes=tuple(doc.get("word_boxes", [])),
                    )
                )
        return cls(entries=entries)


def _page_capacity_chars(db: TemplateDB, cfg: StyleConfig, spec: PageSpec) -> int:
    n_lines = len(baselines_px(spec))
    if n_lines == 0:
        raise CorpusError("page has no usable lines; enlarge it or shrink the margin")
    advances = [g.advance_width for variants in db.glyphs.values() for g in variants]
    mean_advance = sum(advances) / len(advances)
    per_char_units = mean_advance * cfg.width_scale.mean + cfg.char_distance.mean
    usable = spec.width_px - 2 * spec.margin_px
    per_line = usable / (spec.px_per_unit * per_char_units)
    return max(int(0.82 * n_lines * per_line), 1)


def _effective_render_cfg(rcfg: RenderConfig, writing_speed: float) -> RenderConfig:
    if writing_speed == 1.0:
        return rcfg
    width = rcfg.stroke_width_px / (max(writing_speed, 0.1) ** 0.25)
    return replace(rcfg, stroke_width_px=width)


def _compose_page(
    texts: list[str], db: TemplateDB, cfg: StyleConfig, spec: PageSpec, seed: int, page_index: int
) -> tuple[PageGeometry, object]:
    params = sample_page_style(cfg, db, seed, page_index)
    rng = Rng(seed).child(NS_LAYOUT, page_index)
    geom = layout_text(" ".join(texts), db, params, spec, rng)
    return geom, params


def generate_dataset(
    sentences: list[Sentence],
    db: TemplateDB,
    cfg: StyleConfig,
    spec: PageSpec,
    rcfg: RenderConfig,
    seed: int,
    n_pages: int,
    out_dir: Path,
    threads: int = 1,
    run_id: str = "run",
) -> DatasetManifest:
    """Pack sentences onto pages, render, and write images plus manifest.

    Deterministic for a fixed seed regardless of ``threads``: page packing is
    a sequential pre-pass and every page derives its own random streams from
    (seed, page_index).  ``n_pages`` is a cap; generation stops early when
    the sentences run out.  A sentence that alone overflows a page is
    dropped (counted in the returned manifest's page texts, not rendered).
    """
    if n_pages <= 0:
        raise ValueError("n_pages must be positive")
    if not sentences:
        raise ValueError("no sentences to lay out")

    target = _page_capacity_chars(db, cfg, spec)
    queue = deque(sentences)
    pages: list[tuple[int, list[str]]] = []
    page_index = 0
    while queue and page_index < n_pages:
        chosen: list[Sentence] = []
        count = 0
        while queue and (not chosen or count + queue[0].char_count + 1 <= target):
            s = queue.popleft()
            chosen.append(s)
            count += s.char_count + 1
        while chosen:
            try:
                _compose_page([s.text for s in chosen], db, cfg, spec, seed, page_index)
                break
            except PageOverflowError:
                if len(chosen) == 1:
                    # A lone sentence wider/taller than the page: drop it.
                    chosen = []
                    break
                queue.appendleft(chosen[-1])
                chosen = chosen[:-1]
        if chosen:
            pages.append((page_index, [s.text for s in chosen]))
            page_index += 1

    if not pages:
        raise CorpusError("no sentence fits the page")

    run_dir = out_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    def render_one(job: tuple[int, list[str]]) -> ManifestEntry:
        idx, texts = job
        geom, params = _compose_page(texts, db, cfg, spec, seed, idx)
        image = render_page(geom, spec, _effective_render_cfg(rcfg, params.writing_speed))
        rel = f"{run_id}/{idx:06}.png"
        (out_dir / rel).write_bytes(image.to_png_bytes())
        boxes = tuple(
            {"text": wb.text, "box": [wb.x, wb.y, wb.w, wb.h]} for wb in geom.words
        )
        return ManifestEntry(
            image_path=rel,
            ground_truth=geom.ground_truth,
            style_seed=seed,
            page_index=idx,
            word_boxes=boxes,
        )

    if threads <= 1:
        entries = [render_one(job) for job in pages]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(render_one, pages))
    entries.sort(key=lambda e: e.page_index)

    manifest = DatasetManifest(entries=entries)
    manifest.write_jsonl(out_dir / "manifest.jsonl")
    return manifest
