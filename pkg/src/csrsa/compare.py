"""Marginal likelihoods by annealed importance sampling, quadrature and Bayes factors."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .inference import TrialData, _as_data, batched_log_likelihood, propose
from .variants import ModelVariant, PriorSpec

LogLik = Callable[[np.ndarray], np.ndarray]


class CompareError(ValueError):
    pass


def max_threads() -> int:
    """Worker cap from ``CSRSA_THREADS`` (default 1)."""
    raw = os.environ.get("CSRSA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CompareError(f"CSRSA_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise CompareError(f"CSRSA_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class AISConfig:
    """Annealing setup.

    ``schedule`` is ``"geometric"`` (0 followed by ``n_steps - 1`` log-spaced
    temperatures from ``min_temperature`` to 1), ``"linear"`` or an explicit
    increasing sequence from 0 to 1. Each temperature gets one MH step.
    """

    n_chains: int = 100
    n_steps: int = 30000
    schedule: str | Sequence[float] = "geometric"
    seed: int | None = 0
    step_fraction: float = 0.05
    min_temperature: float = 1e-4

    def __post_init__(self):
        if self.n_chains < 1:
            raise CompareError("n_chains must be at least 1")
        if self.n_steps < 2:
            raise CompareError("n_steps must be at least 2")
        if not isinstance(self.schedule, str):
            object.__setattr__(self, "schedule", tuple(float(b) for b in self.schedule))
        elif self.schedule not in ("geometric", "linear"):
            raise CompareError(f"unknown schedule {self.schedule!r}")
        if not 0 < self.min_temperature < 1:
            raise CompareError("min_temperature must lie in (0, 1)")
        self.ladder()

    def ladder(self) -> np.ndarray:
        if self.schedule == "geometric":
            if self.n_steps == 2:
                ladder = np.array([0.0, 1.0])
            else:
                ladder = np.concatenate([[0.0], np.geomspace(self.min_temperature, 1.0, self.n_steps - 1)])
        elif self.schedule == "linear":
            ladder = np.linspace(0.0, 1.0, self.n_steps)
        else:
            ladder = np.asarray(self.schedule, dtype=float)
        if ladder[0] != 0.0 or ladder[-1] != 1.0 or np.any(np.diff(ladder) <= 0):
            raise CompareError("temperature ladder must increase strictly from 0 to 1")
        return ladder


@dataclass(frozen=True)
class AISResult:
    log_marginal: float
    se: float
    log_weights: np.ndarray
    acceptance_rate: float


def ais(log_lik: LogLik, priors: PriorSpec, cfg: AISConfig = AISConfig()) -> AISResult:
    """Run ``cfg.n_chains`` annealing chains in parallel over a vectorised log-likelihood.

    The estimate is the log of the mean importance weight; ``se`` is its
    delta-method standard error across chains.
    """
    rng = np.random.default_rng(cfg.seed)
    ladder = cfg.ladder()
    step = cfg.step_fraction * priors.width
    x = priors.sample(rng, cfg.n_chains)
    ll = np.asarray(log_lik(x), dtype=float)
    log_w = np.zeros(cfg.n_chains)
    accepts = 0
    for k in range(1, len(ladder)):
        # ll is -inf only where the likelihood vanishes; the weight then stays -inf.
        with np.errstate(invalid="ignore"):
            log_w = log_w + np.where(np.isneginf(ll), -np.inf, (ladder[k] - ladder[k - 1]) * ll)
        if k == len(ladder) - 1:
            break
        y = propose(rng, x, step, priors)
        ll_y = np.asarray(log_lik(y), dtype=float)
        with np.errstate(invalid="ignore"):
            delta = np.where(np.isneginf(ll_y), -np.inf, ladder[k] * (ll_y - np.where(np.isneginf(ll), 0, ll)))
            delta = np.where(np.isneginf(ll) & np.isfinite(ll_y), np.inf, delta)
        accept = np.log(rng.random(cfg.n_chains)) < delta
        x = np.where(accept[:, None], y, x)
        ll = np.where(accept, ll_y, ll)
        accepts += int(accept.sum())
    if np.isneginf(log_w).all():
        raise CompareError("every AIS chain ended with zero weight")
    est = float(logsumexp(log_w) - math.log(cfg.n_chains))
    w = np.exp(log_w - log_w.max())
    se = float(w.std(ddof=1) / math.sqrt(cfg.n_chains) / w.mean()) if cfg.n_chains > 1 else float("nan")
    n_moves = max(1, (len(ladder) - 2) * cfg.n_chains)
    return AISResult(est, se, log_w, accepts / n_moves)


def ais_model(data, priors: PriorSpec, model: ModelVariant, cfg: AISConfig = AISConfig()) -> AISResult:
    priors = model.prior(priors)
    data = _as_data(data, model.policy)
    return ais(batched_log_likelihood(data, model, priors.names), priors, cfg)


def ais_log_marginal(data, priors: PriorSpec, model: ModelVariant, cfg: AISConfig = AISConfig()) -> float:
    """AIS estimate of ln p(data | model)."""
    return ais_model(data, priors, model, cfg).log_marginal


def grid_log_marginal(log_lik: LogLik, priors: PriorSpec, points: int = 50,
                      batch: int = 2000) -> float:
    """Trapezoid-rule ln of the prior-weighted likelihood integral over the prior box."""
    d = len(priors.names)
    if d > 3:
        raise CompareError(f"grid quadrature is limited to 3 parameters, got {d}")
    if points < 2:
        raise CompareError("need at least 2 grid points per dimension")
    axes = [np.linspace(lo, hi, points) for lo, hi in zip(priors.lower, priors.upper)]
    w1 = np.ones(points)
    w1[[0, -1]] = 0.5
    log_w1 = np.log(w1)
    grid = np.array(list(itertools.product(*axes)))
    log_w = np.array([sum(t) for t in itertools.product(log_w1, repeat=d)])
    ll = np.concatenate([np.asarray(log_lik(grid[i:i + batch]), dtype=float)
                         for i in range(0, len(grid), batch)])
    log_cell = float(np.sum(np.log(priors.width / (points - 1))))
    total = logsumexp(ll + log_w)
    return float(total + log_cell - priors.log_volume)


def exact_log_marginal_grid(data, priors: PriorSpec, model: ModelVariant,
                            grid_points_per_dim: int = 50) -> float:
    """Quadrature oracle for ln p(data | model); 0 for an empty dataset."""
    priors = model.prior(priors)
    data = _as_data(data, model.policy)
    if not len(data):
        if len(priors.names) > 3:
            raise CompareError(f"grid quadrature is limited to 3 parameters, got {len(priors.names)}")
        return 0.0
    return grid_log_marginal(batched_log_likelihood(data, model, priors.names), priors,
                             grid_points_per_dim)


def bernoulli_log_likelihood(k: int, n: int) -> LogLik:
    """Binomial likelihood of ``k`` successes in ``n`` (including the coefficient)."""
    if not 0 <= k <= n:
        raise CompareError("need 0 <= k <= n")
    log_coef = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)

    def fn(theta: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(theta)[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = log_coef + np.where(k > 0, k * np.log(p), 0.0) + np.where(n - k > 0, (n - k) * np.log1p(-p), 0.0)
        return out
    return fn


@dataclass(frozen=True)
class BayesFactor:
    ln: float
    log10: float
    value: float | None  # None when exp overflows

    def __float__(self):
        return self.value if self.value is not None else float("inf")


def bayes_factor(logZ_a: float, logZ_b: float) -> BayesFactor:
    """p(data | a) / p(data | b) from log marginals."""
    if not (math.isfinite(logZ_a) and math.isfinite(logZ_b)):
        raise CompareError("bayes_factor needs finite log marginals")
    ln = logZ_a - logZ_b
    try:
        value = math.exp(ln)
    except OverflowError:
        value = None
    return BayesFactor(ln, ln / math.log(10), value)


@dataclass(frozen=True)
class ComparisonRow:
    model: str
    log_marginal: float
    se_across_chains: float


def compare_models(data, models: Sequence[tuple[ModelVariant, PriorSpec]],
                   cfg: AISConfig = AISConfig(), threads: int | None = None) -> list[ComparisonRow]:
    """AIS marginal for each model. Seeds are spawned per model, so results do not depend on ``threads``."""
    if not models:
        raise CompareError("no models to compare")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg.seed).spawn(len(models))]
    trials = data.trials if isinstance(data, TrialData) else list(data)

    def one(i: int) -> ComparisonRow:
        variant, priors = models[i]
        res = ais_model(TrialData(trials, variant.policy), priors, variant,
                        AISConfig(cfg.n_chains, cfg.n_steps, cfg.schedule, seeds[i],
                                  cfg.step_fraction, cfg.min_temperature))
        return ComparisonRow(variant.name, res.log_marginal, res.se)

    with ThreadPoolExecutor(max_workers=threads or max_threads()) as pool:
        return list(pool.map(one, range(len(models))))


def bayes_factor_matrix(rows: Sequence[ComparisonRow]) -> dict[tuple[str, str], BayesFactor]:
    """Bayes factor of row model over column model for every ordered pair."""
    return {(a.model, b.model): bayes_factor(a.log_marginal, b.log_marginal)
            for a in rows for b in rows}
