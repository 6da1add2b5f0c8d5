"""Model variants (which parameters are free) and uniform priors over them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .engine import PARAM_NAMES, CostModel, ModelParams
from .scene import AlternativePolicy
from .semantics import FixedSemanticParams, LexiconSpec, TypicalityTable


class VariantError(ValueError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Independent uniform priors, ``name -> (lower, upper)``.

    Names are free-form so toy likelihoods can reuse the samplers; model
    variants check their own parameter names.
    """

    bounds: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        clean = {}
        for name, (lo, hi) in dict(self.bounds).items():
            lo, hi = float(lo), float(hi)
            if not lo < hi:
                raise VariantError(f"prior for {name} needs lower < upper, got ({lo}, {hi})")
            clean[name] = (lo, hi)
        if not clean:
            raise VariantError("a prior needs at least one parameter")
        object.__setattr__(self, "bounds", clean)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.bounds[n][0] for n in self.names])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.bounds[n][1] for n in self.names])

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def log_volume(self) -> float:
        return float(np.log(self.width).sum())

    def log_density(self, theta: np.ndarray) -> np.ndarray:
        theta = np.atleast_2d(theta)
        inside = ((theta >= self.lower) & (theta <= self.upper)).all(axis=1)
        return np.where(inside, -self.log_volume, -np.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lower + rng.random((n, len(self.names))) * self.width

    def restrict(self, names: Sequence[str]) -> "PriorSpec":
        missing = [n for n in names if n not in self.bounds]
        if missing:
            raise VariantError(f"prior does not cover {missing}")
        return PriorSpec({n: self.bounds[n] for n in names})


PRIORS = {
    "exp1": PriorSpec({"x_size": (0, 1), "x_color": (0, 1), "beta_c_size": (0, 40),
                       "beta_c_color": (0, 40), "beta_i": (0, 40)}),
    "exp2": PriorSpec({"x_color": (0, 1), "x_type": (0, 1), "beta_i": (0, 40), "beta_t": (0, 5),
                       "beta_fixed": (0, 1), "beta_c_color": (0, 40), "beta_c_type": (0, 40),
                       "beta_F": (0, 5), "beta_L": (0, 5)}),
    "exp3": PriorSpec({"beta_i": (0, 20), "beta_F": (0, 5), "beta_L": (0, 5), "beta_t": (0, 5),
                       "beta_fixed": (0, 1)}),
}


@dataclass(frozen=True)
class ModelVariant:
    """A speaker model with some flat parameters left free.

    ``base`` fixes the structure (lexicon source, tables, cost kind) and the
    values of every parameter not listed in ``free``.
    """

    name: str
    free: tuple[str, ...]
    base: ModelParams
    policy: AlternativePolicy = field(default_factory=AlternativePolicy)

    def __post_init__(self):
        bad = [n for n in self.free if n not in PARAM_NAMES]
        if bad:
            raise VariantError(f"unknown free parameters {bad}")
        object.__setattr__(self, "free", tuple(self.free))

    def _as_dict(self, theta) -> dict[str, float]:
        if isinstance(theta, Mapping):
            missing = [n for n in self.free if n not in theta]
            if missing:
                raise VariantError(f"missing values for {missing}")
            return {n: float(theta[n]) for n in self.free}
        theta = np.asarray(theta, dtype=float).ravel()
        if len(theta) != len(self.free):
            raise VariantError(f"expected {len(self.free)} values, got {len(theta)}")
        return dict(zip(self.free, map(float, theta)))

    def params(self, theta) -> ModelParams:
        return self.base.with_values(**self._as_dict(theta))

    def values(self, theta: np.ndarray, names: Sequence[str] | None = None) -> dict[str, np.ndarray | float]:
        """Flat engine values for a (K, d) batch; ``names`` gives the column order."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        names = tuple(names) if names is not None else self.free
        out: dict[str, np.ndarray | float] = dict(self.base.flat())
        for j, n in enumerate(names):
            out[n] = theta[:, j]
        return out

    def prior(self, priors: PriorSpec) -> PriorSpec:
        return priors.restrict(self.free)


def _fixed_lexicon(source="fixed", table=None, **x) -> LexiconSpec:
    return LexiconSpec(source, fixed_params=FixedSemanticParams(**x), table=table)


EXP1_POLICY = AlternativePolicy("contextual-features", ("size", "color"))
EXP2_POLICY = AlternativePolicy("contextual-features", ("color", "type"))
EXP3_POLICY = AlternativePolicy("taxonomy-levels")


def exp1_variant(with_costs: bool = True, beta_i: float = 1.0, x_size: float = 0.8,
                 x_color: float = 0.99) -> ModelVariant:
    """Type-level size/colour semantics; optionally per-slot size and colour costs."""
    free = ("x_size", "x_color", "beta_i")
    cm = CostModel()
    if with_costs:
        free += ("beta_c_size", "beta_c_color")
        cm = CostModel("fixed-per-slot", {"size": 0.0, "color": 0.0})
    base = ModelParams(beta_i, _fixed_lexicon(x_size=x_size, x_color=x_color), cm)
    return ModelVariant("exp1" if with_costs else "exp1-nocost", free, base, EXP1_POLICY)


def _cost_part(cost: str, freq: Mapping[str, float] | None, length: Mapping[str, float] | None,
               slots: Sequence[str]) -> tuple[CostModel, tuple[str, ...]]:
    if cost == "none":
        return CostModel(), ()
    if cost == "fixed":
        return (CostModel("fixed-per-slot", {s: 0.0 for s in slots}),
                tuple(f"beta_c_{s}" for s in slots))
    if cost == "empirical":
        if freq is None or length is None:
            raise VariantError("empirical costs need frequency and length tables")
        return CostModel("empirical", freq_table=freq, len_table=length), ("beta_F", "beta_L")
    raise VariantError(f"unknown cost variant {cost!r}")


def exp2_variant(semantics: str, cost: str, table: TypicalityTable | None = None,
                 freq: Mapping[str, float] | None = None,
                 length: Mapping[str, float] | None = None) -> ModelVariant:
    """Colour-typicality models: semantics in {empirical, fixed, interpolated}."""
    cm, cost_free = _cost_part(cost, freq, length, ("color", "type"))
    if semantics == "empirical":
        if table is None:
            raise VariantError("empirical semantics need a typicality table")
        lex, free = LexiconSpec("empirical", table=table), ("beta_i", "beta_t")
    elif semantics == "fixed":
        lex, free = _fixed_lexicon(), ("x_color", "x_type", "beta_i", "beta_t")
    elif semantics == "interpolated":
        if table is None:
            raise VariantError("interpolated semantics need a typicality table")
        lex = _fixed_lexicon("interpolated", table)
        free = ("x_color", "x_type", "beta_i", "beta_t", "beta_fixed")
    else:
        raise VariantError(f"unknown semantics {semantics!r}")
    return ModelVariant(f"exp2-{semantics}-{cost}", free + cost_free,
                        ModelParams(1.0, lex, cm), EXP2_POLICY)


def exp3_variant(cost: str = "empirical", table: TypicalityTable | None = None,
                 freq: Mapping[str, float] | None = None, length: Mapping[str, float] | None = None,
                 interpolate_boolean: bool = True) -> ModelVariant:
    """Nominal choice over sub/basic/super labels.

    With ``interpolate_boolean`` the empirical typicalities are mixed with a
    Boolean noun semantics (fixed semantics with x_type = 1) via beta_fixed.
    """
    if table is None:
        raise VariantError("nominal-choice models need a typicality table")
    if cost not in ("none", "empirical"):
        raise VariantError("nominal-choice cost must be 'none' or 'empirical'")
    cm, cost_free = _cost_part(cost, freq, length, ())
    free = ("beta_i", "beta_t")
    if interpolate_boolean:
        lex = _fixed_lexicon("interpolated", table, x_type=1.0)
        free += ("beta_fixed",)
    else:
        lex = LexiconSpec("empirical", table=table)
    return ModelVariant(f"exp3-{cost}", free + cost_free, ModelParams(1.0, lex, cm), EXP3_POLICY)


EXP2_VARIANTS = tuple(f"exp2-{s}-{c}" for s in ("empirical", "fixed", "interpolated")
                      for c in ("none", "fixed", "empirical"))
VARIANT_NAMES = ("exp1", "exp1-nocost", *EXP2_VARIANTS, "exp3-none", "exp3-empirical")


def make_variant(name: str, table: TypicalityTable | None = None,
                 freq: Mapping[str, float] | None = None,
                 length: Mapping[str, float] | None = None) -> ModelVariant:
    """Build a named variant from :data:`VARIANT_NAMES`."""
    if name == "exp1":
        return exp1_variant(True)
    if name == "exp1-nocost":
        return exp1_variant(False)
    if name.startswith("exp2-"):
        _, semantics, cost = name.split("-")
        return exp2_variant(semantics, cost, table, freq, length)
    if name.startswith("exp3-"):
        return exp3_variant(name.split("-", 1)[1], table, freq, length)
    raise VariantError(f"unknown model variant {name!r}; choose from {VARIANT_NAMES}")
