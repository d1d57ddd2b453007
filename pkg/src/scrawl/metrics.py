"""Word/character accuracy evaluation under three normalization modes.

Accuracy definitions used throughout: WAR = max(0, 1 - WER) * 100 and
CAR = max(0, 1 - CER) * 100, with WER/CER pooled over the whole corpus
(total edits divided by total reference tokens/characters).  Error rates
can exceed 1, so accuracies are floor-clamped at 0.  Numbers from other
tools are comparable only under this convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errorpairs import edit_distance


class NormalizationMode(str, Enum):
    RAW = "raw"
    LOWERCASE = "lowercase"
    ALPHA_ONLY = "alpha_only"

    @classmethod
    def parse(cls, name: str) -> "NormalizationMode":
        key = name.strip().lower()
        aliases = {"alpha": cls.ALPHA_ONLY, "alphabetical": cls.ALPHA_ONLY}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown normalization mode {name!r}") from None


MODE_LABELS = {
    NormalizationMode.RAW: "Raw text",
    NormalizationMode.LOWERCASE: "Lowercase only",
    NormalizationMode.ALPHA_ONLY: "Only alphabetical",
}


class MetricsError(Exception):
    pass


def normalize(text: str, mode: NormalizationMode) -> str:
    """Apply one preprocessing mode.

    alpha_only lowercases, replaces every non-letter scalar with a space
    (so word boundaries survive), then collapses whitespace runs.
    """
    if mode is NormalizationMode.RAW:
        return text
    lowered = text.lower()
    if mode is NormalizationMode.LOWERCASE:
        return lowered
    replaced = "".join(c if c.isalpha() else " " for c in lowered)
    return " ".join(replaced.split())


def word_error_rate(reference: str, hypothesis: str) -> float:
    """Levenshtein distance over whitespace tokens / reference word count."""
    ref_tokens = reference.split()
    if not ref_tokens:
        raise MetricsError("reference has no words; WER undefined")
    return edit_distance(ref_tokens, hypothesis.split()) / len(ref_tokens)


def char_error_rate(reference: str, hypothesis: str) -> float:
    if not reference:
        raise MetricsError("reference is empty; CER undefined")
    return edit_distance(reference, hypothesis) / len(reference)


@dataclass(frozen=True, slots=True)
class ModeReport:
    """Pooled counts and clamped accuracy percentages for one mode."""

    word_edits: int
    word_count: int
    char_edits: int
    char_count: int

    @property
    def war_percent(self) -> float | None:
        if self.word_count == 0:
            return None
        return max(0.0, 1.0 - self.word_edits / self.word_count) * 100.0

    @property
    def car_percent(self) -> float | None:
        if self.char_count == 0:
            return None
        return max(0.0, 1.0 - self.char_edits / self.char_count) * 100.0


@dataclass
class MetricsReport:
    modes: dict[NormalizationMode, ModeReport]

    def to_json(self) -> dict:
        out = {}
        for mode, rep in self.modes.items():
            out[mode.value] = {
                "war_percent": rep.war_percent,
                "car_percent": rep.car_percent,
                "word_edits": rep.word_edits,
                "word_count": rep.word_count,
                "char_edits": rep.char_edits,
                "char_count": rep.char_count,
            }
        return out

    def format_table(self) -> str:
        rows = [("Normalization", "WAR, %", "CAR, %")]
        for mode, rep in self.modes.items():
            war = "n/a" if rep.war_percent is None else f"{rep.war_percent:.3f}"
            car = "n/a" if rep.car_percent is None else f"{rep.car_percent:.3f}"
            rows.append((MODE_LABELS[mode], war, car))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = []
        for i, row in enumerate(rows):
            lines.append(
                f"{row[0]:<{widths[0]}}  {row[1]:>{widths[1]}}  {row[2]:>{widths[2]}}"
            )
            if i == 0:
                lines.append("-" * (sum(widths) + 4))
        return "\n".join(lines)


def evaluate(
    pairs: list[tuple[str, str]],
    modes: list[NormalizationMode] | None = None,
) -> MetricsReport:
    """Pooled WAR/CAR over (reference, hypothesis) pairs for each mode.

    A mode under which every reference normalizes to nothing yields None
    accuracies rather than an error.
    """
    if not pairs:
        raise MetricsError("no evaluation pairs")
    if modes is None:
        modes = list(NormalizationMode)
    report: dict[NormalizationMode, ModeReport] = {}
    for mode in modes:
        word_edits = word_count = char_edits = char_count = 0
        for ref, hyp in pairs:
            nref = normalize(ref, mode)
            nhyp = normalize(hyp, mode)
            ref_tokens = nref.split()
            word_edits += edit_distance(ref_tokens, nhyp.split())
            word_count += len(ref_tokens)
            char_edits += edit_distance(nref, nhyp)
            char_count += len(nref)
        report[mode] = ModeReport(
            word_edits=word_edits,
            word_count=word_count,
            char_edits=char_edits,
            char_count=char_count,
        )
    return MetricsReport(modes=report)


def report_to_json_text(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), ensure_ascii=False, indent=2)
