"""scikit-learn style wrappers around the speaker model.

``X`` is a sequence of contexts (bare, ``(id, context)`` pairs or labelled)
and ``y`` the coded utterance produced for each context's target.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_codes, check_contexts, check_fitted, check_sample_weight
from .engine import CostModel, ModelParams, compile_contexts, table_from_compiled
from .inference import Trial, TrialData, hdi, map_estimate, mh_sample
from .scene import AlternativePolicy
from .semantics import FixedSemanticParams, LexiconSpec
from .variants import PRIORS, PriorSpec, make_variant


def _policy(policy) -> AlternativePolicy:
    if policy is None:
        return AlternativePolicy()
    if isinstance(policy, AlternativePolicy):
        return policy
    raise ValueError("policy must be an AlternativePolicy or None")


class _SpeakerMixin:
    """Prediction methods for estimators that expose ``_params()`` and ``_policy()``."""

    def predict_proba(self, X) -> list[dict[str, float]]:
        """Per context, the speaker distribution over its alternatives (text -> probability)."""
        pairs = check_contexts(X)
        cc = compile_contexts([c for _, c in pairs], self._active_policy())
        table = table_from_compiled(cc, [str(i) for i in range(len(pairs))], self._active_params())
        return [table.column(str(i)) for i in range(len(pairs))]

    def predict(self, X) -> np.ndarray:
        """Most probable utterance text per context (first alternative on ties)."""
        return np.array([max(d, key=d.get) for d in self.predict_proba(X)], dtype=object)

    def score(self, X, y, sample_weight=None) -> float:
        """Mean log-likelihood per production."""
        pairs = check_contexts(X)
        codes = check_codes(y, len(pairs))
        w = check_sample_weight(sample_weight, len(pairs))
        data = TrialData([Trial(ctx, code, int(k)) for (_, ctx), code, k in zip(pairs, codes, w)],
                         self._active_policy())
        return float(data.log_likelihood(self._active_params())[0] / w.sum())


class SpeakerModel(_SpeakerMixin, BaseEstimator):
    """Speaker with fixed, user-supplied parameters.

    Parameters
    ----------
    x_size, x_color, x_type : float
        Type-level semantic values used by the fixed lexicon.
    beta_i, beta_t : float
        Informativeness weight and literal-listener sharpness.
    lexicon : {"fixed", "boolean", "empirical", "interpolated"}
    table : TypicalityTable, optional
        Needed by the empirical and interpolated lexicons.
    beta_fixed : float
        Mixture weight of the fixed lexicon in the interpolated one.
    cost_weights : dict, optional
        Per-slot cost weights, e.g. ``{"size": 1.0, "color": 1.0}``.
    policy : AlternativePolicy, optional
    """

    def __init__(self, x_size=1.0, x_color=1.0, x_type=1.0, beta_i=1.0, beta_t=1.0,
                 lexicon="fixed", table=None, beta_fixed=0.0, cost_weights=None, policy=None):
        self.x_size = x_size
        self.x_color = x_color
        self.x_type = x_type
        self.beta_i = beta_i
        self.beta_t = beta_t
        self.lexicon = lexicon
        self.table = table
        self.beta_fixed = beta_fixed
        self.cost_weights = cost_weights
        self.policy = policy

    def _build(self) -> ModelParams:
        fixed = FixedSemanticParams(self.x_size, self.x_color, self.x_type)
        lex = LexiconSpec(self.lexicon, fixed_params=fixed if self.lexicon != "boolean" else None,
                          table=self.table, beta_fixed=self.beta_fixed)
        cm = CostModel("fixed-per-slot", self.cost_weights) if self.cost_weights else CostModel()
        return ModelParams(self.beta_i, lex, cm, self.beta_t)

    def fit(self, X=None, y=None, sample_weight=None):
        """Validate the parameters; there is nothing to learn."""
        self.params_ = self._build()
        self.policy_ = _policy(self.policy)
        return self

    def _active_params(self):
        check_fitted(self, ["params_"])
        return self.params_

    def _active_policy(self):
        check_fitted(self, ["policy_"])
        return self.policy_


class BayesianSpeaker(_SpeakerMixin, BaseEstimator):
    """Speaker whose free parameters are inferred by Metropolis-Hastings.

    Predictions use the joint-MAP sample. After ``fit``: ``trace_``,
    ``map_params_``, ``map_values_`` and ``hdi_`` (95% intervals).
    """

    def __init__(self, variant="exp1-nocost", priors="exp1", n_samples=2000, burn_in=10000,
                 lag=10, random_state=0, table=None, freq=None, length=None):
        self.variant = variant
        self.priors = priors
        self.n_samples = n_samples
        self.burn_in = burn_in
        self.lag = lag
        self.random_state = random_state
        self.table = table
        self.freq = freq
        self.length = length

    def fit(self, X, y, sample_weight=None):
        pairs = check_contexts(X)
        codes = check_codes(y, len(pairs))
        w = check_sample_weight(sample_weight, len(pairs))
        variant = make_variant(self.variant, self.table, self.freq, self.length)
        priors = self.priors if isinstance(self.priors, PriorSpec) else PRIORS[self.priors]
        trials = [Trial(ctx, code, int(k), cid) for (cid, ctx), code, k in zip(pairs, codes, w)]
        self.variant_ = variant
        self.trace_ = mh_sample(TrialData(trials, variant.policy), priors, variant,
                                n_samples=self.n_samples, burn_in=self.burn_in, lag=self.lag,
                                seed=self.random_state)
        self.map_params_ = map_estimate(self.trace_)
        self.map_values_ = self.trace_.sample_dict(self.trace_.map_index)
        self.hdi_ = {n: hdi(self.trace_.column(n)) for n in self.trace_.names}
        return self

    def _active_params(self):
        check_fitted(self, ["map_params_"])
        return self.map_params_

    def _active_policy(self):
        check_fitted(self, ["variant_"])
        return self.variant_.policy
