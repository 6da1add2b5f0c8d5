"""Reference listener/speaker values for the three-pin scene, printed at two decimals."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

from .engine import ModelParams, literal_listener, speaker
from .generators import PIN_POLICY, fixed_params, gen_fig1_context
from .scene import enumerate_alternatives
from .semantics import LexiconSpec, TypicalityTable, load_typicality_table

TOLERANCE = 0.005  # rounding radius of two printed decimals
GOLDEN_X_SIZE, GOLDEN_X_COLOR = 0.8, 0.99


@dataclass(frozen=True)
class GoldenCell:
    table: str       # "literal" or "speaker"
    semantics: str   # "boolean" or "continuous"
    beta_i: float | None
    utterance: str
    object: str
    expected: float


@dataclass(frozen=True)
class GoldenCheck:
    cell: GoldenCell
    got: float

    @property
    def tolerance(self) -> float:
        # Boolean values are exact fractions.
        return 1e-9 if self.cell.semantics == "boolean" else TOLERANCE

    @property
    def deviation(self) -> float:
        return abs(self.got - self.cell.expected)

    @property
    def ok(self) -> bool:
        return self.deviation <= self.tolerance + 1e-12


def _read_data(name: str) -> str:
    return resources.files("csrsa").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def load_golden() -> list[GoldenCell]:
    rows = csv.DictReader(io.StringIO(_read_data("golden_pins.csv")))
    return [GoldenCell(r["table"], r["semantics"], float(r["beta_i"]) if r["beta_i"] else None,
                       r["utterance"], r["object"], float(r["value"])) for r in rows]


def banana_typicalities() -> TypicalityTable:
    """Measured colour/type typicality means for the three banana items."""
    rows = csv.DictReader(io.StringIO(_read_data("banana_typicality.csv")))
    return load_typicality_table((r["utterance"], r["object"], r["typicality"]) for r in rows)


def golden_params(semantics: str, beta_i: float = 1.0) -> ModelParams:
    if semantics == "boolean":
        return ModelParams(beta_i, LexiconSpec("boolean"))
    return fixed_params(GOLDEN_X_SIZE, GOLDEN_X_COLOR, beta_i=beta_i)


def check_golden() -> list[GoldenCheck]:
    """Recompute every reference cell with the engine."""
    ctx = gen_fig1_context("size")
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    by_text = {u.text: u for u in alts}
    out = []
    for cell in load_golden():
        params = golden_params(cell.semantics, cell.beta_i or 1.0)
        if cell.table == "literal":
            got = literal_listener(ctx, by_text[cell.utterance], params)[cell.object]
        else:
            got = speaker(ctx, cell.object, params, alts)[cell.utterance]
        out.append(GoldenCheck(cell, float(got)))
    return out
