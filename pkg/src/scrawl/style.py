"""Two-stage handwriting augmentation.

Stage 1 samples page-level style parameters (one value per page, uniform
within each parameter's configured range).  Stage 2 perturbs individual
glyph instances around those page values with zero-mean Gaussian noise, so
page means stay on the stage-1 values.

Randomness is a counter-based Philox stream keyed hierarchically by
``(seed, namespace, page_index, glyph_index, ...)`` through numpy's
``SeedSequence`` spawn keys; sibling streams are independent and pages can
be generated in parallel in any order.  The algorithm (Philox4x64 +
SeedSequence) is fixed and relied on by golden tests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import IO

import numpy as np

from .geometry import ControlNode, Point2
from .templates import TemplateDB

# Stream namespaces (first element of a spawn key under the root seed).
NS_STYLE = 0
NS_LAYOUT = 1
NS_NOISE = 2


class Rng:
    """Deterministic hierarchical random stream.

    ``Rng(seed).child(a, b)`` and ``Rng(seed).child(a).child(b)`` denote the
    same stream; identical keys always yield identical draws.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = seed
        self.path = path
        self._gen: np.random.Generator | None = None

    def child(self, *key: int) -> "Rng":
        return Rng(self.seed, self.path + key)

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def normal(self, std: float, mean: float = 0.0) -> float:
        return float(self.gen.normal(mean, std))

    def uniform(self, lo: float, hi: float) -> float:
        if lo == hi:
            return lo
        return float(self.gen.uniform(lo, hi))

    def random(self) -> float:
        return float(self.gen.random())

    def integers(self, n: int) -> int:
        return int(self.gen.integers(n))


@dataclass(frozen=True, slots=True)
class ParamSpec:
    """Mean plus allowed range for one page-level style parameter."""

    mean: float
    lo: float | None = None
    hi: float | None = None

    def bounds(self) -> tuple[float, float]:
        lo = self.mean if self.lo is None else self.lo
        hi = self.mean if self.hi is None else self.hi
        return lo, hi

    def validate(self, name: str) -> None:
        lo, hi = self.bounds()
        if not (lo <= self.mean <= hi):
            raise ValueError(f"{name}: mean {self.mean} outside range [{lo}, {hi}]")

    @classmethod
    def fixed(cls, value: float) -> "ParamSpec":
        return cls(mean=value)

    @classmethod
    def from_json(cls, value) -> "ParamSpec":
        if isinstance(value, (int, float)):
            return cls.fixed(float(value))
        if isinstance(value, dict):
            mean = float(value["mean"])
            lo = value.get("lo")
            hi = value.get("hi")
            return cls(mean, None if lo is None else float(lo), None if hi is None else float(hi))
        raise ValueError(f"parameter must be a number or {{mean, lo, hi}}, got {value!r}")


# Parameters whose sampled value must stay non-negative / in [0, 1].
_NON_NEGATIVE = {
    "point_noise_std",
    "vector_rotation_noise_std",
    "vector_length_noise_std",
    "char_distance_std",
    "space_distance_std",
    "point_size_std",
    "y_delta_max",
    "y_delta_speed",
}
_PROBABILITY = {"symbol_disconnect_prob"}


@dataclass(frozen=True)
class StyleConfig:
    """Ranges for every page-level parameter.

    Defaults give a legible medium augmentation; the source material never
    fixes numeric values, so these are this project's own calibration.
    """

    width_scale: ParamSpec = ParamSpec(1.0, 0.85, 1.15)
    char_distance: ParamSpec = ParamSpec(0.22, 0.14, 0.32)
    space_distance: ParamSpec = ParamSpec(0.55, 0.4, 0.7)
    skew_angle: ParamSpec = ParamSpec(0.12, 0.0, 0.24)
    point_size_scale: ParamSpec = ParamSpec(1.0, 0.85, 1.15)
    y_delta_max: ParamSpec = ParamSpec(0.25, 0.1, 0.4)
    y_delta_speed: ParamSpec = ParamSpec(0.05, 0.02, 0.09)
    symbol_disconnect_prob: ParamSpec = ParamSpec(0.25, 0.0, 0.5)
    point_noise_std: ParamSpec = ParamSpec(0.02, 0.008, 0.035)
    vector_rotation_noise_std: ParamSpec = ParamSpec(0.06, 0.02, 0.1)
    vector_length_noise_std: ParamSpec = ParamSpec(0.06, 0.02, 0.1)
    char_distance_std: ParamSpec = ParamSpec(0.035, 0.015, 0.06)
    space_distance_std: ParamSpec = ParamSpec(0.07, 0.03, 0.12)
    point_size_std: ParamSpec = ParamSpec(0.08, 0.03, 0.14)
    # Experimental: modulates polyline flattening density and nib width,
    # gently; semantics are this project's reading of an underspecified knob.
    writing_speed: ParamSpec = ParamSpec(1.0, 0.9, 1.15)
    # Horizontal gap (glyph units) inserted when a letter is disconnected
    # from its predecessor. Not sampled; tunable.
    disconnect_gap: float = 0.15

    def __post_init__(self):
        for name, spec in self.param_specs().items():
            spec.validate(name)
            lo, hi = spec.bounds()
            if name in _NON_NEGATIVE and lo < 0:
                raise ValueError(f"{name}: range must be non-negative")
            if name in _PROBABILITY and not (0.0 <= lo and hi <= 1.0):
                raise ValueError(f"{name}: range must stay inside [0, 1]")
        if self.disconnect_gap < 0:
            raise ValueError("disconnect_gap must be non-negative")

    def param_specs(self) -> dict[str, ParamSpec]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if isinstance(getattr(self, f.name), ParamSpec)
        }

    @classmethod
    def zero_noise(cls, **means: float) -> "StyleConfig":
        """All ranges collapsed to means, all noise and drift off.

        Keyword overrides replace individual means (still zero-width).
        """
        base = {
            "width_scale": 1.0,
            "char_distance": 0.25,
            "space_distance": 0.5,
            "skew_angle": 0.0,
            "point_size_scale": 1.0,
            "y_delta_max": 0.0,
            "y_delta_speed": 0.0,
            "symbol_disconnect_prob": 0.0,
            "point_noise_std": 0.0,
            "vector_rotation_noise_std": 0.0,
            "vector_length_noise_std": 0.0,
            "char_distance_std": 0.0,
            "space_distance_std": 0.0,
            "point_size_std": 0.0,
            "writing_speed": 1.0,
        }
        base.update(means)
        return cls(**{k: ParamSpec.fixed(v) for k, v in base.items()})

    @classmethod
    def from_json(cls, source: bytes | str | Path | IO) -> "StyleConfig":
        if isinstance(source, Path):
            raw = source.read_text(encoding="utf-8")
        elif isinstance(source, bytes):
            raw = source.decode("utf-8")
        elif isinstance(source, str):
            raw = source
        else:
            raw = source.read()
            if isinstance(raw, bytes):
                raw = raw.decode("utf-8")
        doc = json.loads(raw)
        if not isinstance(doc, dict):
            raise ValueError("style config must be a JSON object")
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in doc.items():
            if key not in known:
                raise ValueError(f"unknown style parameter {key!r}")
            if key == "disconnect_gap":
                kwargs[key] = float(value)
            else:
                kwargs[key] = ParamSpec.from_json(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class StyleParams:
    """Concrete page style: one value per parameter plus variant choices."""

    width_scale: float
    char_distance: float
    space_distance: float
    skew_angle: float
    point_size_scale: float
    y_delta_max: float
    y_delta_speed: float
    symbol_disconnect_prob: float
    point_noise_std: float
    vector_rotation_noise_std: float
    vector_length_noise_std: float
    char_distance_std: float
    space_distance_std: float
    point_size_std: float
    writing_speed: float
    disconnect_gap: float
    variant_assignment: dict[str, str]
    seed: int


def sample_page_style(cfg: StyleConfig, db: TemplateDB, seed: int, page_index: int) -> StyleParams:
    """Stage 1: draw the page-level values and fix one variant per character.

    The variant assignment is stable for the whole page: every occurrence of
    a character on the page uses the same variant.
    """
    rng = Rng(seed).child(NS_STYLE, page_index)
    values = {}
    for name, spec in sorted(cfg.param_specs().items()):
        lo, hi = spec.bounds()
        values[name] = rng.uniform(lo, hi)
    assignment = {}
    for ch in sorted(db.glyphs):
        variants = db.glyphs[ch]
        assignment[ch] = variants[rng.integers(len(variants))].variant_id
    return StyleParams(
        variant_assignment=assignment,
        seed=seed,
        disconnect_gap=cfg.disconnect_gap,
        **values,
    )


def perturb_node(node: ControlNode, params: StyleParams, rng: Rng) -> ControlNode:
    """Stage 2: jitter one control node.

    The point gets an independent Gaussian offset per axis; the handle
    vector is rotated by a Gaussian angle and scaled by (1 + Gaussian).
    Flags are untouched.  With all stds zero the node is returned bit-equal.
    """
    dx = rng.normal(params.point_noise_std)
    dy = rng.normal(params.point_noise_std)
    angle = rng.normal(params.vector_rotation_noise_std)
    scale = 1.0 + rng.normal(params.vector_length_noise_std)
    p = Point2(node.p.x + dx, node.p.y + dy)
    v = node.v.rotated(angle).scaled(scale) if (angle != 0.0 or scale != 1.0) else node.v
    return ControlNode(p, v, node.flags)
