"""Literal listener, pragmatic speaker and pragmatic listener.

Everything is computed by one vectorised path over a batch of compiled
contexts and a batch of K parameter settings (arrays shaped
``(K, contexts, utterances, objects)``), so the scalar operations used in
tests, the MCMC likelihood and the AIS population all share the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scene import (SLOTS, AlternativePolicy, ReferenceContext, Utterance,
                    enumerate_alternatives)
from .semantics import FixedSemanticParams, LexiconSpec, TypicalityTable, utterance_key

COST_KINDS = ("none", "fixed-per-slot", "empirical")

# Flat numeric parameters understood by the batched engine.
PARAM_NAMES = ("x_size", "x_color", "x_type", "beta_i", "beta_t", "beta_fixed",
               *(f"beta_c_{s}" for s in SLOTS), "beta_F", "beta_L")

_X_GROUPS = ("x_size", "x_color", "x_type")
_SLOT_GROUP = {"size": "x_size", "color": "x_color", "type": "x_type",
               "sub": "x_type", "basic": "x_type", "super": "x_type"}


class EngineError(ValueError):
    """Degenerate distributions (no support) and bad cost lookups."""


@dataclass(frozen=True)
class CostModel:
    kind: str = "none"
    per_slot: Mapping[str, float] = field(default_factory=dict)
    beta_F: float = 0.0
    beta_L: float = 0.0
    freq_table: Mapping[str, float] = field(default_factory=dict)
    len_table: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise EngineError(f"unknown cost kind {self.kind!r}")
        per_slot = {str(k): float(v) for k, v in dict(self.per_slot).items()}
        for k, v in per_slot.items():
            if k not in SLOTS:
                raise EngineError(f"unknown cost slot {k!r}")
            if v < 0:
                raise EngineError("cost weights must be nonnegative")
        if self.beta_F < 0 or self.beta_L < 0:
            raise EngineError("cost weights must be nonnegative")
        object.__setattr__(self, "per_slot", per_slot)
        for name in ("freq_table", "len_table"):
            table = {utterance_key(k): float(v) for k, v in dict(getattr(self, name)).items()}
            if any(not 0.0 <= v <= 1.0 for v in table.values()):
                raise EngineError(f"{name} values must be normalised to [0, 1]")
            object.__setattr__(self, name, table)

    # Hashing by identity keeps the compiled-cost cache cheap.
    __hash__ = object.__hash__


def normalize_minmax(values: Mapping[str, float]) -> dict[str, float]:
    """Min-max scale raw per-utterance values (over the whole lexicon) into [0, 1]."""
    if not values:
        return {}
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        return {k: 0.0 for k in values}
    return {k: (v - lo) / (hi - lo) for k, v in values.items()}


def empirical_cost_model(neg_log_freq: Mapping[str, float], lengths: Mapping[str, float],
                         beta_F: float, beta_L: float) -> CostModel:
    """Cost model from raw negative log frequencies and mean lengths."""
    return CostModel("empirical", beta_F=beta_F, beta_L=beta_L,
                     freq_table=normalize_minmax(neg_log_freq), len_table=normalize_minmax(lengths))


def cost(u: Utterance, cm: CostModel) -> float:
    if cm.kind == "none":
        return 0.0
    if cm.kind == "fixed-per-slot":
        return math.fsum(cm.per_slot.get(s, 0.0) for s in u.slots)
    key = utterance_key(u.text)
    if key not in cm.freq_table or key not in cm.len_table:
        raise EngineError(f"no frequency/length entry for utterance {u.text!r}")
    return cm.beta_F * cm.freq_table[key] + cm.beta_L * cm.len_table[key]


@dataclass(frozen=True)
class ModelParams:
    beta_i: float
    lexicon: LexiconSpec
    cost: CostModel = field(default_factory=CostModel)
    beta_t: float = 1.0

    def __post_init__(self):
        if not self.beta_i >= 0 or not self.beta_t >= 0:
            raise EngineError("beta_i and beta_t must be nonnegative")

    def flat(self) -> dict[str, float]:
        """Numeric parameters keyed by :data:`PARAM_NAMES`."""
        fp = self.lexicon.fixed_params or FixedSemanticParams()
        out = {"x_size": fp.x_size, "x_color": fp.x_color, "x_type": fp.x_type,
               "beta_i": float(self.beta_i), "beta_t": float(self.beta_t),
               "beta_fixed": self.lexicon.beta_fixed,
               "beta_F": self.cost.beta_F, "beta_L": self.cost.beta_L}
        for s in SLOTS:
            out[f"beta_c_{s}"] = self.cost.per_slot.get(s, 0.0)
        return out

    def with_values(self, **values: float) -> "ModelParams":
        """Copy with some flat parameters replaced."""
        flat = {**self.flat(), **values}
        lex = self.lexicon
        if lex.fixed_params is not None or any(k in values for k in _X_GROUPS):
            fixed = FixedSemanticParams(flat["x_size"], flat["x_color"], flat["x_type"])
            lex = replace(lex, fixed_params=fixed, beta_fixed=flat["beta_fixed"])
        else:
            lex = replace(lex, beta_fixed=flat["beta_fixed"])
        per_slot = {s: flat[f"beta_c_{s}"] for s in SLOTS
                    if s in self.cost.per_slot or f"beta_c_{s}" in values}
        cm = replace(self.cost, per_slot=per_slot, beta_F=flat["beta_F"], beta_L=flat["beta_L"])
        return replace(self, beta_i=flat["beta_i"], beta_t=flat["beta_t"], lexicon=lex, cost=cm)


@dataclass(frozen=True)
class Distribution:
    support: tuple
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if len(probs) != len(self.support):
            raise EngineError("support and probs differ in length")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise EngineError("not a probability distribution")
        object.__setattr__(self, "probs", tuple(float(p) for p in probs))

    def __getitem__(self, key) -> float:
        for k, p in zip(self.support, self.probs):
            if k == key or (isinstance(k, Utterance) and k.text == key):
                return p
        raise KeyError(key)

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def argmax(self):
        """Most probable key; ties go to the first in support order."""
        return self.support[int(np.argmax(self.probs))]


class CompiledContexts:
    """Padded feature-match tensors for a batch of contexts and their alternatives."""

    def __init__(self, contexts: Sequence[ReferenceContext],
                 alternatives: Sequence[Sequence[Utterance]]):
        if len(contexts) != len(alternatives):
            raise EngineError("one alternative set per context is required")
        self.contexts = tuple(contexts)
        self.alternatives = tuple(tuple(a) for a in alternatives)
        C = len(self.contexts)
        U = max((len(a) for a in self.alternatives), default=0)
        O = max((len(c.objects) for c in self.contexts), default=0)
        self.shape = (C, U, O)
        self.u_valid = np.zeros((C, U), bool)
        self.prior = np.zeros((C, O))
        self.true = np.zeros((C, U, O))
        self.n_true = {g: np.zeros((C, U, O)) for g in _X_GROUPS}
        self.n_false = {g: np.zeros((C, U, O)) for g in _X_GROUPS}
        self.slot_counts = {s: np.zeros((C, U)) for s in SLOTS}
        self.targets = np.array([c.target_index for c in self.contexts], dtype=int)
        for c, (ctx, alts) in enumerate(zip(self.contexts, self.alternatives)):
            self.prior[c, :len(ctx.objects)] = ctx.prior
            for i, u in enumerate(alts):
                self.u_valid[c, i] = True
                for s in u.slots:
                    self.slot_counts[s][c, i] += 1
                for j, o in enumerate(ctx.objects):
                    self.true[c, i, j] = u.is_true_of(o)
                    for s, label in u.terms:
                        hit = o.features.value(s) == label
                        (self.n_true if hit else self.n_false)[_SLOT_GROUP[s]][c, i, j] += 1
        for g in _X_GROUPS:
            self.n_true[g] = self.n_true[g].astype(np.intp)
            self.n_false[g] = self.n_false[g].astype(np.intp)
        with np.errstate(divide="ignore"):
            self.log_prior = np.log(self.prior)
        self.active_groups = tuple(g for g in _X_GROUPS
                                   if self.n_true[g].any() or self.n_false[g].any())
        self._empirical: dict[int, tuple[TypicalityTable, np.ndarray]] = {}
        self._costs: dict[int, tuple[CostModel, np.ndarray, np.ndarray]] = {}

    def __len__(self):
        return len(self.contexts)

    def empirical(self, table: TypicalityTable) -> np.ndarray:
        hit = self._empirical.get(id(table))
        if hit is not None and hit[0] is table:
            return hit[1]
        arr = np.zeros(self.shape)
        for c, (ctx, alts) in enumerate(zip(self.contexts, self.alternatives)):
            for i, u in enumerate(alts):
                for j, o in enumerate(ctx.objects):
                    arr[c, i, j] = table.get(u, o)
        self._empirical[id(table)] = (table, arr)
        return arr

    def empirical_cost_terms(self, cm: CostModel) -> tuple[np.ndarray, np.ndarray]:
        hit = self._costs.get(id(cm))
        if hit is not None and hit[0] is cm:
            return hit[1], hit[2]
        freq = np.zeros(self.shape[:2])
        length = np.zeros(self.shape[:2])
        for c, alts in enumerate(self.alternatives):
            for i, u in enumerate(alts):
                key = utterance_key(u.text)
                if key not in cm.freq_table or key not in cm.len_table:
                    raise EngineError(f"no frequency/length entry for utterance {u.text!r}")
                freq[c, i] = cm.freq_table[key]
                length[c, i] = cm.len_table[key]
        self._costs[id(cm)] = (cm, freq, length)
        return freq, length


def compile_contexts(contexts: Sequence[ReferenceContext], policy: AlternativePolicy | None = None,
                     alternatives: Sequence[Sequence[Utterance]] | None = None) -> CompiledContexts:
    if alternatives is None:
        policy = policy or AlternativePolicy()
        alternatives = [enumerate_alternatives(c, policy) for c in contexts]
    return CompiledContexts(contexts, alternatives)


def _column(values: Mapping[str, np.ndarray | float], name: str) -> np.ndarray:
    return np.asarray(values.get(name, 0.0), dtype=float).reshape(-1, 1, 1, 1)


def _powers(x: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """x**exponents for small integer exponents, by table lookup: (K,) x (C,U,O) -> (K,C,U,O)."""
    table = x[:, None] ** np.arange(int(exponents.max()) + 1)
    return table[:, exponents]


def semantic_tensor(cc: CompiledContexts, lexicon: LexiconSpec,
                    values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """(K, C, U, O) semantic values for K parameter settings."""
    if lexicon.source == "boolean":
        return cc.true[None]
    if lexicon.source in ("fixed", "interpolated"):
        fixed = np.ones((1,) + cc.shape)
        for g in cc.active_groups:
            x = np.asarray(values.get(g, 0.0), dtype=float).reshape(-1)
            fixed = fixed * _powers(x, cc.n_true[g]) * _powers(1.0 - x, cc.n_false[g])
        if lexicon.source == "fixed":
            return fixed
        bf = _column(values, "beta_fixed")
        return bf * fixed + (1.0 - bf) * cc.empirical(lexicon.table)[None]
    return cc.empirical(lexicon.table)[None]


def literal_log_tensor(cc: CompiledContexts, lexicon: LexiconSpec,
                       values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """log P_L0(o | u), shape (K, C, U, O); rows with no support are all -inf.

    Boolean lexicons filter (P proportional to prior x truth value). Continuous
    lexicons use P proportional to prior x exp(beta_t x value).
    """
    sem = semantic_tensor(cc, lexicon, values)
    prior = cc.prior[None, :, None, :]
    if lexicon.source == "boolean":
        weights = prior * sem
        total = weights.sum(axis=3, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.log(weights) - np.log(total)
    else:
        # exp(beta_t * sem) is bounded by exp(beta_t), so no max shift is needed
        scaled = _column(values, "beta_t") * sem
        total = (prior * np.exp(scaled)).sum(axis=3, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = cc.log_prior[None, :, None, :] + scaled - np.log(total)
    logp = np.where(np.isnan(logp), -np.inf, logp)
    return np.where(cc.u_valid[None, :, :, None], logp, -np.inf)


def cost_tensor(cc: CompiledContexts, cm: CostModel,
                values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """(K, C, U) utterance costs."""
    if cm.kind == "none":
        return np.zeros((1,) + cc.shape[:2])
    if cm.kind == "fixed-per-slot":
        out = np.zeros((1,) + cc.shape[:2])
        for s in SLOTS:
            w = np.asarray(values.get(f"beta_c_{s}", 0.0), dtype=float).reshape(-1, 1, 1)
            if np.any(w) and cc.slot_counts[s].any():
                out = out + w * cc.slot_counts[s][None]
        return out
    freq, length = cc.empirical_cost_terms(cm)
    bF = np.asarray(values.get("beta_F", 0.0), dtype=float).reshape(-1, 1, 1)
    bL = np.asarray(values.get("beta_L", 0.0), dtype=float).reshape(-1, 1, 1)
    return bF * freq[None] + bL * length[None]


def utility_tensor(cc: CompiledContexts, lexicon: LexiconSpec, cm: CostModel,
                   values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """beta_i ln L0 - cost, shape (K, C, U, O); ln 0 gives -inf for any beta_i."""
    log_l0 = literal_log_tensor(cc, lexicon, values)
    bi = _column(values, "beta_i")
    with np.errstate(invalid="ignore"):
        info = np.where(np.isneginf(log_l0), -np.inf, bi * log_l0)
    return info - cost_tensor(cc, cm, values)[..., None]


def _log_normalise(util: np.ndarray, axis: int) -> np.ndarray:
    """util - logsumexp(util) along ``axis``; all -inf slices stay -inf."""
    m = util.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        norm = np.log(np.exp(util - m).sum(axis=axis, keepdims=True)) + m
    with np.errstate(invalid="ignore"):
        logp = util - norm
    return np.where(np.isneginf(util) | ~np.isfinite(norm), -np.inf, logp)


def speaker_log_tensor(cc: CompiledContexts, lexicon: LexiconSpec, cm: CostModel,
                       values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """log P_S1(u | o), shape (K, C, U, O), normalised over utterances."""
    return _log_normalise(utility_tensor(cc, lexicon, cm, values), axis=2)


def speaker_target_log_tensor(cc: CompiledContexts, lexicon: LexiconSpec, cm: CostModel,
                              values: Mapping[str, np.ndarray | float]) -> np.ndarray:
    """log P_S1(u | target) for each context, shape (K, C, U)."""
    log_l0 = literal_log_tensor(cc, lexicon, values)
    log_l0 = np.take_along_axis(log_l0, cc.targets[None, :, None, None], axis=3)[..., 0]
    bi = np.asarray(values.get("beta_i", 0.0), dtype=float).reshape(-1, 1, 1)
    with np.errstate(invalid="ignore"):
        info = np.where(np.isneginf(log_l0), -np.inf, bi * log_l0)
    return _log_normalise(info - cost_tensor(cc, cm, values), axis=2)


# ---------------------------------------------------------------------------
# Scalar operations on single contexts


def _values(params: ModelParams) -> dict[str, float]:
    return params.flat()


def literal_listener(ctx: ReferenceContext, u: Utterance, params: ModelParams) -> Distribution:
    cc = CompiledContexts([ctx], [[u]])
    logp = literal_log_tensor(cc, params.lexicon, _values(params))[0, 0, 0, :len(ctx.objects)]
    if np.isneginf(logp).all():
        raise EngineError(f"utterance {u.text!r} has no support in this context")
    return Distribution(ctx.ids, tuple(_normalised(np.exp(logp))))


def utility(u: Utterance, o_id: str, ctx: ReferenceContext, params: ModelParams) -> float:
    cc = CompiledContexts([ctx], [[u]])
    util = utility_tensor(cc, params.lexicon, params.cost, _values(params))
    return float(util[0, 0, 0, ctx.ids.index(o_id)])


def speaker(ctx: ReferenceContext, o_id: str, params: ModelParams,
            alts: Sequence[Utterance]) -> Distribution:
    alts = tuple(alts)
    if not alts:
        raise EngineError("no alternatives")
    cc = CompiledContexts([ctx], [alts])
    logp = speaker_log_tensor(cc, params.lexicon, params.cost, _values(params))
    col = logp[0, 0, :len(alts), ctx.ids.index(o_id)]
    if np.isneginf(col).all():
        raise EngineError(f"every alternative has -inf utility for {o_id!r}")
    return Distribution(alts, tuple(_normalised(np.exp(col))))


def speaker_matrix(ctx: ReferenceContext, params: ModelParams,
                   alts: Sequence[Utterance]) -> np.ndarray:
    """P_S1(u | o) for all alternatives (rows) and objects (columns)."""
    cc = CompiledContexts([ctx], [tuple(alts)])
    logp = speaker_log_tensor(cc, params.lexicon, params.cost, _values(params))
    return np.exp(logp[0, 0, :len(alts), :len(ctx.objects)])


def pragmatic_listener(ctx: ReferenceContext, u: Utterance, params: ModelParams,
                       alts: Sequence[Utterance]) -> Distribution:
    alts = tuple(alts)
    if u not in alts:
        raise EngineError(f"{u.text!r} is not among the alternatives")
    s1 = speaker_matrix(ctx, params, alts)[alts.index(u)]
    mass = s1 * np.asarray(ctx.prior)
    if not mass.sum() > 0:
        raise EngineError(f"no object gives {u.text!r} nonzero probability")
    return Distribution(ctx.ids, tuple(_normalised(mass)))


def _normalised(p: np.ndarray) -> np.ndarray:
    p = np.where(np.isfinite(p), p, 0.0)
    return p / p.sum()


# ---------------------------------------------------------------------------
# Prediction tables


@dataclass(frozen=True)
class PredictionRow:
    context_id: str
    utterance: str
    probability: float
    aggregate_class: str


@dataclass(frozen=True)
class PredictionTable:
    rows: tuple[PredictionRow, ...] = ()

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def cells(self) -> dict[tuple[str, str], float]:
        return {(r.context_id, r.utterance): r.probability for r in self.rows}

    @property
    def context_ids(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(r.context_id for r in self.rows))

    def column(self, context_id: str) -> dict[str, float]:
        return {r.utterance: r.probability for r in self.rows if r.context_id == context_id}

    def class_mass(self, context_id: str, *classes: str) -> float:
        """Total probability of the given aggregate classes (e.g. ``size-and-color``)."""
        return math.fsum(r.probability for r in self.rows
                         if r.context_id == context_id and r.aggregate_class in classes)

    def mention_mass(self, context_id: str, slot: str) -> float:
        """Total probability of utterances mentioning ``slot``."""
        return math.fsum(r.probability for r in self.rows
                         if r.context_id == context_id and slot in r.aggregate_class.split("-and-"))

    def rounded(self, decimals: int = 6) -> "PredictionTable":
        return PredictionTable(tuple(replace(r, probability=round(r.probability, decimals))
                                     for r in self.rows))


def labeled(contexts: Iterable) -> list[tuple[str, ReferenceContext]]:
    """Normalise contexts to (id, context) pairs.

    Accepts bare contexts (ids become positions), ``(id, context)`` pairs or
    objects exposing ``label`` and ``context``.
    """
    out = []
    for i, item in enumerate(contexts):
        if isinstance(item, ReferenceContext):
            out.append((str(i), item))
        elif hasattr(item, "context") and hasattr(item, "label"):
            out.append((str(item.label), item.context))
        else:
            cid, ctx = item
            out.append((str(cid), ctx))
    return out


def prediction_table(contexts: Iterable, params: ModelParams,
                     policy: AlternativePolicy | None = None) -> PredictionTable:
    """Speaker probabilities for each context's target over its alternatives."""
    pairs = labeled(contexts)
    if not pairs:
        return PredictionTable()
    cc = compile_contexts([c for _, c in pairs], policy)
    return table_from_compiled(cc, [cid for cid, _ in pairs], params)


def table_from_compiled(cc: CompiledContexts, ids: Sequence[str], params: ModelParams) -> PredictionTable:
    logp = speaker_log_tensor(cc, params.lexicon, params.cost, _values(params))[0]
    rows = []
    for c, (cid, alts) in enumerate(zip(ids, cc.alternatives)):
        col = logp[c, :len(alts), cc.targets[c]]
        if np.isneginf(col).all():
            raise EngineError(f"context {cid}: every alternative has -inf utility for the target")
        probs = _normalised(np.exp(col))
        rows.extend(PredictionRow(cid, u.text, float(p), u.utterance_class) for u, p in zip(alts, probs))
    return PredictionTable(tuple(rows))
