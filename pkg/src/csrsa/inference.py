"""Likelihood of coded production data, Metropolis-Hastings sampling and summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .engine import (CompiledContexts, ModelParams, PredictionRow, PredictionTable,
                     compile_contexts, labeled, prediction_table, speaker_target_log_tensor,
                     table_from_compiled)
from .scene import AlternativePolicy, ContextError, ReferenceContext, Utterance, resolve_utterance
from .variants import ModelVariant, PriorSpec


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class Trial:
    """``count`` productions of ``coded_utterance`` for the target of ``context``."""

    context: ReferenceContext
    coded_utterance: Utterance | str
    count: int = 1
    context_id: str = ""

    def __post_init__(self):
        if isinstance(self.count, bool) or int(self.count) != self.count or self.count < 1:
            raise InferenceError(f"trial count must be a positive integer, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))


class TrialData:
    """Trials grouped by context and compiled for batched likelihood evaluation.

    ``counts[c, u]`` holds the number of productions of alternative ``u`` in
    distinct context ``c``. Contexts are grouped by ``context_id`` when given,
    otherwise by value.
    """

    def __init__(self, trials: Sequence[Trial], policy: AlternativePolicy):
        self.policy = policy
        self.trials = tuple(trials)
        keys: dict[Any, int] = {}
        contexts: list[ReferenceContext] = []
        ids: list[str] = []
        for t in self.trials:
            key = t.context_id or t.context
            if key not in keys:
                keys[key] = len(contexts)
                contexts.append(t.context)
                ids.append(t.context_id or str(len(ids)))
            elif contexts[keys[key]] != t.context:
                raise InferenceError(f"context id {t.context_id!r} names two different contexts")
        self.context_ids = tuple(ids)
        self.compiled: CompiledContexts = compile_contexts(contexts, policy)
        C, U, _ = self.compiled.shape
        self.counts = np.zeros((C, U))
        for t in self.trials:
            c = keys[t.context_id or t.context]
            alts = self.compiled.alternatives[c]
            u = t.coded_utterance
            try:
                u = resolve_utterance(u, t.context, alts) if isinstance(u, str) else u
            except ContextError as exc:
                raise InferenceError(f"context {ids[c]}: {exc}") from exc
            if u not in alts:
                raise InferenceError(f"context {ids[c]}: {u.text!r} is not an alternative")
            self.counts[c, alts.index(u)] += t.count
        self._observed = self.counts > 0

    def __len__(self):
        return len(self.trials)

    @property
    def n_observations(self) -> int:
        return int(self.counts.sum())

    def log_likelihood(self, model: ModelParams, values: Mapping[str, np.ndarray | float] | None = None) -> np.ndarray:
        """Log-likelihood for each of K parameter settings (shape ``(K,)``)."""
        if not self.trials:
            k = 1 if values is None else max(np.size(v) for v in values.values())
            return np.zeros(k)
        values = model.flat() if values is None else values
        cc = self.compiled
        at_target = speaker_target_log_tensor(cc, model.lexicon, model.cost, values)
        with np.errstate(invalid="ignore"):
            terms = np.where(self._observed[None], self.counts[None] * at_target, 0.0)
        out = terms.sum(axis=(1, 2))
        return np.where(np.isnan(out), -np.inf, out)

    def empirical_table(self) -> PredictionTable:
        """Observed production proportions as a prediction table."""
        rows = []
        for c, (cid, alts) in enumerate(zip(self.context_ids, self.compiled.alternatives)):
            total = self.counts[c].sum()
            for i, u in enumerate(alts):
                rows.append(PredictionRow(cid, u.text, float(self.counts[c, i] / total),
                                          u.utterance_class))
        return PredictionTable(tuple(rows))


def _as_data(data, policy: AlternativePolicy | None) -> TrialData:
    if isinstance(data, TrialData):
        return data
    return TrialData(list(data), policy or AlternativePolicy())


def log_likelihood(data, params: ModelParams, policy: AlternativePolicy | None = None) -> float:
    """Sum over trials of count x ln P_S1(coded utterance | target); -inf if any is impossible."""
    return float(_as_data(data, policy).log_likelihood(params)[0])


# ---------------------------------------------------------------------------
# Metropolis-Hastings


def reflect(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold values back into [lower, upper] by mirror reflection at the bounds."""
    width = upper - lower
    y = np.mod(x - lower, 2 * width)
    return lower + np.where(y > width, 2 * width - y, y)


def propose(rng: np.random.Generator, x: np.ndarray, step: np.ndarray,
            priors: PriorSpec) -> np.ndarray:
    """Reflected Gaussian random-walk proposal (symmetric, stays in the prior box)."""
    return reflect(x + step * rng.standard_normal(x.shape), priors.lower, priors.upper)


def batched_log_likelihood(data: TrialData, variant: ModelVariant,
                           names: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised ``theta (K, d) -> log-likelihood (K,)`` for a variant."""
    def fn(theta: np.ndarray) -> np.ndarray:
        return data.log_likelihood(variant.base, variant.values(theta, names))
    return fn


@dataclass(frozen=True, eq=False)
class Trace:
    """Retained MH samples: ``values[i]`` is the i-th sample in ``names`` order."""

    names: tuple[str, ...]
    values: np.ndarray
    log_post: np.ndarray
    meta: Mapping[str, Any] = field(default_factory=dict)
    model: ModelVariant | None = None

    def __post_init__(self):
        values = np.atleast_2d(np.array(self.values, dtype=float))
        log_post = np.array(self.log_post, dtype=float).ravel()
        if values.size == 0:
            values = values.reshape(0, len(self.names))
        if values.shape != (len(log_post), len(self.names)):
            raise InferenceError("trace values and log_post disagree in length")
        values.setflags(write=False)
        log_post.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "log_post", log_post)

    def __len__(self):
        return len(self.log_post)

    def __eq__(self, other):
        return (isinstance(other, Trace) and self.names == other.names
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.log_post, other.log_post) and dict(self.meta) == dict(other.meta))

    __hash__ = object.__hash__

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    @property
    def map_index(self) -> int:
        if len(self) == 0:
            raise InferenceError("empty trace")
        return int(np.argmax(self.log_post))  # argmax returns the first maximum

    def sample_dict(self, i: int) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.values[i])))

    @property
    def samples(self) -> list[ModelParams]:
        if self.model is None:
            raise InferenceError("trace has no model attached")
        return [self.model.params(self.sample_dict(i)) for i in range(len(self))]


def initial_state(rng: np.random.Generator, log_post: Callable[[np.ndarray], np.ndarray],
                  priors: PriorSpec, n_draws: int = 1000) -> tuple[np.ndarray, float]:
    draws = priors.sample(rng, n_draws)
    lp = log_post(draws)
    best = int(np.argmax(lp))
    if not np.isfinite(lp[best]):
        raise InferenceError(f"zero likelihood at all {n_draws} initial prior draws")
    return draws[best], float(lp[best])


def mh_sample(data, priors: PriorSpec, model: ModelVariant, n_samples: int = 2000,
              burn_in: int = 10000, lag: int = 10, seed: int | None = 0,
              step_fraction: float = 0.05, adapt: bool = True,
              target_acceptance: float = 0.3) -> Trace:
    """Random-walk Metropolis-Hastings over the free parameters of ``model``.

    Steps start at ``step_fraction`` of each prior width. With ``adapt`` a
    common step scale is tuned during burn-in only, nudged toward
    ``target_acceptance``; the retained chain uses a fixed kernel. The chain
    starts from the best of 1000 prior draws.

    Returns a :class:`Trace` of ``n_samples`` states kept every ``lag``
    iterations after ``burn_in``.
    """
    if n_samples < 1 or burn_in < 0 or lag < 1:
        raise InferenceError("need n_samples >= 1, burn_in >= 0 and lag >= 1")
    priors = model.prior(priors)
    names = priors.names
    data = _as_data(data, model.policy)
    ll = batched_log_likelihood(data, model, names)

    def log_post(theta):
        return priors.log_density(theta) + ll(theta)

    rng = np.random.default_rng(seed)
    x, lp = initial_state(rng, log_post, priors)
    base_step = step_fraction * priors.width
    scale = 1.0
    max_scale = 1.0 / step_fraction
    window_accepts = 0
    kept_values = np.empty((n_samples, len(names)))
    kept_lp = np.empty(n_samples)
    accepts = 0
    total = burn_in + n_samples * lag
    for it in range(total):
        y = propose(rng, x[None], base_step * scale, priors)
        lp_y = float(log_post(y)[0])
        accepted = math.log(rng.random()) < lp_y - lp
        if accepted:
            x, lp = y[0], lp_y
        if it < burn_in:
            window_accepts += accepted
            if adapt and (it + 1) % 100 == 0:
                rate = window_accepts / 100
                scale = float(np.clip(scale * math.exp(rate - target_acceptance), 1e-3, max_scale))
                window_accepts = 0
        else:
            accepts += accepted
            j = it - burn_in
            if (j + 1) % lag == 0:
                kept_values[j // lag] = x
                kept_lp[j // lag] = lp
    meta = {"burn_in": burn_in, "lag": lag, "n_samples": n_samples, "seed": seed,
            "acceptance_rate": accepts / (n_samples * lag), "step_scale": scale,
            "model": model.name}
    return Trace(names, kept_values, kept_lp, meta, model)


# ---------------------------------------------------------------------------
# Summaries


def hdi(samples: Sequence[float], mass: float = 0.95) -> tuple[float, float]:
    """Narrowest interval covering ceil(mass * n) sorted samples; ties go to the lower one."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n < 2:
        raise InferenceError("hdi needs at least two samples")
    if not 0.0 < mass <= 1.0:
        raise InferenceError("mass must lie in (0, 1]")
    k = max(1, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[:n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def map_estimate(trace: Trace) -> ModelParams:
    """Parameters of the retained sample with the highest log-posterior (earliest on ties)."""
    if trace.model is None:
        raise InferenceError("trace has no model attached")
    return trace.model.params(trace.sample_dict(trace.map_index))


def posterior_predictive(trace: Trace, contexts, policy: AlternativePolicy | None = None) -> PredictionTable:
    """Prediction table at the joint-MAP sample."""
    policy = policy or (trace.model.policy if trace.model else None)
    return prediction_table(contexts, map_estimate(trace), policy)


def correlate(pred: PredictionTable, empirical: PredictionTable) -> float:
    """Pearson r over matched (context, utterance) cells."""
    a, b = pred.cells(), empirical.cells()
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))[:3]
        raise InferenceError(f"prediction tables have different cells, e.g. {missing}")
    if len(a) < 3:
        raise InferenceError("correlation needs at least three cells")
    keys = sorted(a)
    x = np.array([a[k] for k in keys])
    y = np.array([b[k] for k in keys])
    if x.std() == 0 or y.std() == 0:
        raise InferenceError("correlation undefined for constant tables")
    return float(stats.pearsonr(x, y)[0])


# ---------------------------------------------------------------------------
# Synthetic data and parameter recovery


def simulate_trials(contexts, params: ModelParams, policy: AlternativePolicy,
                    n_trials: int, seed: int | None = 0) -> list[Trial]:
    """Draw ``n_trials`` productions, spread evenly over the (labelled) contexts.

    Returns aggregated trials, one per (context, utterance) with nonzero count.
    """
    pairs = labeled(contexts)
    if not pairs or n_trials < 1:
        raise InferenceError("need at least one context and one trial")
    cc = compile_contexts([c for _, c in pairs], policy)
    table = table_from_compiled(cc, [cid for cid, _ in pairs], params)
    rng = np.random.default_rng(seed)
    per = np.full(len(pairs), n_trials // len(pairs))
    per[:n_trials % len(pairs)] += 1
    out = []
    for c, ((cid, ctx), n) in enumerate(zip(pairs, per)):
        alts = cc.alternatives[c]
        probs = np.array([table.column(cid)[u.text] for u in alts])
        counts = rng.multinomial(int(n), probs / probs.sum())
        out.extend(Trial(ctx, u, int(k), cid) for u, k in zip(alts, counts) if k > 0)
    return out


@dataclass(frozen=True)
class RecoveryReport:
    generating: Mapping[str, float]
    hdis: Mapping[str, tuple[float, float]]
    map_values: Mapping[str, float]
    correlation: float
    trace: Trace

    @property
    def covered(self) -> dict[str, bool]:
        return {n: lo <= self.generating[n] <= hi for n, (lo, hi) in self.hdis.items()}

    @property
    def all_covered(self) -> bool:
        return all(self.covered.values())


def run_recovery(contexts, variant: ModelVariant, priors: PriorSpec, generating: Mapping[str, float],
                 n_trials: int = 2000, seed: int | None = 0, mass: float = 0.95,
                 **mh_kwargs) -> RecoveryReport:
    """Simulate data at ``generating``, refit by MH and summarise coverage."""
    truth = variant.params(generating)
    ss = np.random.SeedSequence(seed)
    data_seed, chain_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    trials = simulate_trials(contexts, truth, variant.policy, n_trials, data_seed)
    data = TrialData(trials, variant.policy)
    trace = mh_sample(data, priors, variant, seed=chain_seed, **mh_kwargs)
    hdis = {n: hdi(trace.column(n), mass) for n in trace.names}
    best = trace.sample_dict(trace.map_index)
    pred = table_from_compiled(data.compiled, data.context_ids, map_estimate(trace))
    r = correlate(pred, data.empirical_table())
    return RecoveryReport(dict(generating), hdis, best, r, trace)
