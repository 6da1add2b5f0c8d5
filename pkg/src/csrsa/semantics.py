"""Lexicons: Boolean, fixed type-level, empirical typicality and interpolated."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .scene import SceneObject, Utterance

SOURCES = ("boolean", "fixed", "empirical", "interpolated")

# Which fixed semantic value governs each slot. Taxonomy levels are nouns.
SLOT_PARAM = {
    "size": "x_size",
    "color": "x_color",
    "type": "x_type",
    "sub": "x_type",
    "basic": "x_type",
    "super": "x_type",
}


class LexiconError(ValueError):
    pass


def _unit(name: str, v: float) -> float:
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise LexiconError(f"{name} must lie in [0, 1], got {v}")
    return v


@dataclass(frozen=True)
class FixedSemanticParams:
    x_size: float = 1.0
    x_color: float = 1.0
    x_type: float = 1.0

    def __post_init__(self):
        for name in ("x_size", "x_color", "x_type"):
            object.__setattr__(self, name, _unit(name, getattr(self, name)))

    def for_slot(self, slot: str) -> float:
        return getattr(self, SLOT_PARAM[slot])


def utterance_key(text: str) -> str:
    return " ".join(str(text).replace("_", " ").split()).lower()


def object_key(text: str) -> str:
    return "_".join(str(text).replace("_", " ").split()).lower()


@dataclass(frozen=True, eq=False)
class TypicalityTable:
    """Mean typicality per (utterance, object) key pair; absent pairs read as 0."""

    entries: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (u, o), v in dict(self.entries).items():
            clean[(utterance_key(u), object_key(o))] = _unit("typicality", v)
        object.__setattr__(self, "entries", clean)

    def get(self, utterance: Utterance | str, o: SceneObject | str) -> float:
        u = utterance.text if isinstance(utterance, Utterance) else utterance
        k = o.key if isinstance(o, SceneObject) else o
        return self.entries.get((utterance_key(u), object_key(k)), 0.0)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, TypicalityTable) and self.entries == other.entries

    __hash__ = object.__hash__


def load_typicality_table(rows: Iterable[tuple[str, str, float]]) -> TypicalityTable:
    """Build a table from (utterance, object, value) rows, averaging duplicate keys."""
    sums: dict[tuple[str, str], list[float]] = defaultdict(list)
    for i, row in enumerate(rows):
        try:
            u, o, v = row
            v = float(v)
        except (TypeError, ValueError) as exc:
            raise LexiconError(f"row {i}: malformed typicality row {row!r}") from exc
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise LexiconError(f"row {i}: typicality {v} outside [0, 1]")
        if not utterance_key(u) or not object_key(o):
            raise LexiconError(f"row {i}: empty utterance or object")
        sums[(utterance_key(u), object_key(o))].append(v)
    return TypicalityTable({k: math.fsum(vs) / len(vs) for k, vs in sums.items()})


@dataclass(frozen=True)
class LexiconSpec:
    source: str = "fixed"
    fixed_params: FixedSemanticParams | None = None
    table: TypicalityTable | None = None
    beta_fixed: float = 0.0

    def __post_init__(self):
        if self.source not in SOURCES:
            raise LexiconError(f"unknown lexicon source {self.source!r}")
        if self.source in ("fixed", "interpolated") and self.fixed_params is None:
            raise LexiconError(f"{self.source} lexicon needs fixed_params")
        if self.source in ("empirical", "interpolated") and self.table is None:
            raise LexiconError(f"{self.source} lexicon needs a typicality table")
        object.__setattr__(self, "beta_fixed", _unit("beta_fixed", self.beta_fixed))

    @property
    def is_continuous(self) -> bool:
        return self.source != "boolean"


def compose_product(v1: float, v2: float) -> float:
    return v1 * v2


def interpolate(fixed_v: float, empirical_v: float, beta_fixed: float) -> float:
    return beta_fixed * fixed_v + (1.0 - beta_fixed) * empirical_v


def fixed_value(params: FixedSemanticParams, u: Utterance, o: SceneObject) -> float:
    """Product over terms of x (term true of ``o``) or 1 - x (term false)."""
    value = 1.0
    for slot, label in u.terms:
        x = params.for_slot(slot)
        value = compose_product(value, x if o.features.value(slot) == label else 1.0 - x)
    return value


def semantic_value(spec: LexiconSpec, u: Utterance, o: SceneObject) -> float:
    if spec.source == "boolean":
        return 1.0 if u.is_true_of(o) else 0.0
    if spec.source == "fixed":
        return fixed_value(spec.fixed_params, u, o)
    if spec.source == "empirical":
        return spec.table.get(u, o)
    return interpolate(fixed_value(spec.fixed_params, u, o), spec.table.get(u, o), spec.beta_fixed)
