"""Deterministic condition generators for the standard simulations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .engine import CostModel, ModelParams
from .scene import AlternativePolicy, ContextError, ReferenceContext, make_context, obj
from .semantics import FixedSemanticParams, LexiconSpec, TypicalityTable


@dataclass(frozen=True)
class LabeledContext:
    label: str
    context: ReferenceContext
    meta: Mapping[str, object] = field(default_factory=dict)


# Size/colour pin scenes are scored against size and colour alternatives only.
PIN_POLICY = AlternativePolicy("contextual-features", ("size", "color"))
# Furniture scenes: every alternative is a noun phrase, optionally modified.
KOOLEN_POLICY = AlternativePolicy("contextual-features", ("size", "color", "type"), require=("type",))
BANANA_POLICY = AlternativePolicy("contextual-features", ("color", "type"), require=("type",))


def gen_fig1_context(sufficient: str = "size") -> ReferenceContext:
    """Three-pin scene where ``sufficient`` alone singles out the target.

    ``size``: small blue target among a big blue and a big red pin.
    ``color``: the mirror image, small blue target among a small red and a
    big red pin, so only colour distinguishes it.
    """
    if sufficient == "size":
        objects = [obj("big_blue", "pin", "big", "blue"), obj("big_red", "pin", "big", "red"),
                   obj("small_blue", "pin", "small", "blue")]
        return make_context(objects, "small_blue")
    if sufficient == "color":
        objects = [obj("small_red", "pin", "small", "red"), obj("big_red", "pin", "big", "red"),
                   obj("small_blue", "pin", "small", "blue")]
        return make_context(objects, "small_blue")
    raise ContextError(f"sufficient must be 'size' or 'color', got {sufficient!r}")


def fixed_params(x_size: float = 1.0, x_color: float = 1.0, x_type: float = 1.0,
                 beta_i: float = 1.0, beta_t: float = 1.0,
                 cost: CostModel | None = None) -> ModelParams:
    """ModelParams with a fixed type-level lexicon."""
    lex = LexiconSpec("fixed", fixed_params=FixedSemanticParams(x_size, x_color, x_type))
    return ModelParams(beta_i, lex, cost or CostModel(), beta_t)


def gen_sim1_grid(x_size_values: Sequence[float], x_color_values: Sequence[float],
                  beta_i_values: Sequence[float] = (30.0,)) -> list[tuple[ModelParams, ReferenceContext]]:
    """Cartesian grid of zero-cost fixed-lexicon settings paired with the size-sufficient scene."""
    grids = [list(v) for v in (x_size_values, x_color_values, beta_i_values)]
    if any(not g for g in grids):
        raise ContextError("every grid axis needs at least one value")
    ctx = gen_fig1_context("size")
    return [(fixed_params(xs, xc, beta_i=bi), ctx) for xs, xc, bi in itertools.product(*grids)]


def koolen_params(x_size: float = 0.8, x_color: float = 0.999, x_type: float = 0.9,
                  beta_i: float = 30.0, word_cost: float = 1.0) -> ModelParams:
    """Defaults used for the furniture-scene simulation (one cost unit per word)."""
    cm = CostModel("fixed-per-slot", {"size": word_cost, "color": word_cost, "type": word_cost})
    return fixed_params(x_size, x_color, x_type, beta_i, cost=cm)


def gen_koolen_contexts() -> list[LabeledContext]:
    """Four furniture scenes: two studies crossed with low/high colour variation.

    In every scene colour is redundant for the target (``t``). Study 1 targets
    differ from the distractors in type; study 2 targets share their type with
    one distractor and differ from it in size.
    """
    specs = {
        "exp1-low": [obj("t", "fan", "big", "red"), obj("a", "chair", "big", "red"),
                     obj("b", "couch", "big", "red"), obj("c", "desk", "big", "red")],
        "exp1-high": [obj("t", "couch", "small", "blue"), obj("a", "chair", "big", "blue"),
                      obj("b", "fan", "big", "red"), obj("c", "desk", "small", "green")],
        "exp2-low": [obj("t", "chair", "big", "brown"), obj("a", "chair", "small", "brown"),
                     obj("b", "fan", "big", "brown"), obj("c", "fan", "small", "brown")],
        "exp2-high": [obj("t", "chair", "small", "brown"), obj("a", "chair", "big", "brown"),
                      obj("b", "fan", "big", "red"), obj("c", "couch", "small", "blue")],
    }
    out = []
    for label, objects in specs.items():
        study, variation = label.split("-")
        out.append(LabeledContext(label, make_context(objects, "t"),
                                  {"study": study, "variation": variation}))
    return out


def gen_variation_sweep(sufficient: str | None = None) -> list[LabeledContext]:
    """Scene-variation conditions ``n_total-n_shared`` for each sufficient dimension.

    The target is a small blue pin among ``n_total`` distractors that all
    differ from it on the sufficient dimension; ``n_shared`` of them (at least
    one) share its value on the insufficient dimension. Labels look like
    ``size-3-2``.
    """
    dims = ("size", "color") if sufficient is None else (sufficient,)
    if any(d not in ("size", "color") for d in dims):
        raise ContextError(f"sufficient must be 'size' or 'color', got {sufficient!r}")
    target = {"size": "small", "color": "blue"}
    other = {"size": "big", "color": "red"}
    out = []
    for dim in dims:
        redundant = "color" if dim == "size" else "size"
        for n_total in (2, 3, 4):
            for n_shared in range(1, n_total + 1):
                objects = [obj("t", "pin", "small", "blue")]
                for i in range(n_total):
                    feats = {dim: other[dim],
                             redundant: target[redundant] if i < n_shared else other[redundant]}
                    objects.append(obj(f"d{i + 1}", "pin", feats["size"], feats["color"]))
                meta = {"sufficient": dim, "redundant": redundant, "n_total": n_total,
                        "n_shared": n_shared, "variation": (n_total - n_shared) / n_total}
                out.append(LabeledContext(f"{dim}-{n_total}-{n_shared}",
                                          make_context(objects, "t"), meta))
    return out


BANANA_COLORS = ("yellow", "brown", "blue")
BANANA_TYPICALITY = {"yellow": 0.9, "brown": 0.35, "blue": 0.1}


def gen_banana_contexts() -> list[LabeledContext]:
    """Banana targets of decreasing colour typicality, one scene per colour.

    Each scene holds the banana, a different fruit of the same colour (so
    colour alone never suffices) and a fruit of another colour.
    """
    others = {"yellow": ("lemon", "apple", "red"), "brown": ("pear", "lemon", "yellow"),
              "blue": ("plum", "lemon", "yellow")}
    out = []
    for color in BANANA_COLORS:
        same_type, other_type, other_color = others[color]
        objects = [obj("t", "banana", color=color), obj("a", same_type, color=color),
                   obj("b", other_type, color=other_color)]
        out.append(LabeledContext(f"banana-{color}", make_context(objects, "t"), {"color": color}))
    return out


def banana_typicality_table(low: float = 0.01, high: float = 0.99) -> TypicalityTable:
    """Hypothetical lexicon: graded values for bare ``banana``, near-Boolean otherwise."""
    all_objects = {o.key: o for c in gen_banana_contexts() for o in c.context.objects}
    entries: dict[tuple[str, str], float] = {}
    for okey, o in all_objects.items():
        ftype, fcolor = o.features.type_name, o.features.color
        for other in all_objects.values():
            t, c = other.features.type_name, other.features.color
            for u in (t, f"{c} {t}"):
                true = u in (ftype, f"{fcolor} {ftype}")
                if u == "banana" and ftype == "banana":
                    value = BANANA_TYPICALITY[fcolor]
                else:
                    value = high if true else low
                entries[(u, okey)] = value
    return TypicalityTable(entries)


def banana_params(beta_i: float = 12.0, color_cost: float = 5.0, beta_t: float = 1.0) -> ModelParams:
    lex = LexiconSpec("empirical", table=banana_typicality_table())
    return ModelParams(beta_i, lex, CostModel("fixed-per-slot", {"color": color_cost}), beta_t)


@dataclass(frozen=True)
class Generator:
    name: str
    make: Callable[[], list[LabeledContext]]
    policy: AlternativePolicy
    table: Callable[[], TypicalityTable] | None = None  # default lexicon table, if any


def _single(sufficient: str) -> Callable[[], list[LabeledContext]]:
    return lambda: [LabeledContext(f"fig1-{sufficient}", gen_fig1_context(sufficient),
                                   {"sufficient": sufficient})]


GENERATORS = {
    "fig1": Generator("fig1", _single("size"), PIN_POLICY),
    "fig1-color": Generator("fig1-color", _single("color"), PIN_POLICY),
    "koolen": Generator("koolen", gen_koolen_contexts, KOOLEN_POLICY),
    "variation": Generator("variation", gen_variation_sweep, PIN_POLICY),
    "banana": Generator("banana", gen_banana_contexts, BANANA_POLICY, banana_typicality_table),
}


def builtin_contexts() -> dict[str, ReferenceContext]:
    """Every generator context keyed by its label."""
    return {c.label: c.context for g in GENERATORS.values() for c in g.make()}


def get_generator(name: str) -> Generator:
    try:
        return GENERATORS[name]
    except KeyError:
        raise ContextError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian parameter grid run against a named generator."""

    grid: Mapping[str, Sequence[float]]
    generator: str
    out: str | None = None

    def __post_init__(self):
        grid = {str(k): tuple(float(v) for v in vs) for k, vs in dict(self.grid).items()}
        if not grid or any(not vs for vs in grid.values()):
            raise ContextError("sweep grid needs at least one parameter with at least one value")
        get_generator(self.generator)
        object.__setattr__(self, "grid", grid)

    def points(self) -> list[dict[str, float]]:
        names = list(self.grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.grid.values())]
