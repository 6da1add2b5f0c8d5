import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from csrsa import BayesianSpeaker, SpeakerModel
from csrsa.generators import PIN_POLICY, fixed_params, gen_fig1_context, gen_variation_sweep
from csrsa.inference import simulate_trials
from csrsa.scene import Utterance

CTX = gen_fig1_context("size")


def pinned_model():
    return SpeakerModel(x_size=0.8, x_color=0.99, beta_i=30, policy=PIN_POLICY).fit()


class TestSpeakerModel:
    def test_params_round_trip(self):
        est = SpeakerModel(x_size=0.7, beta_i=3)
        assert est.get_params()["x_size"] == 0.7
        assert clone(est).get_params() == est.get_params()
        est.set_params(beta_i=5)
        assert est.beta_i == 5

    def test_predict_proba(self):
        (dist,) = pinned_model().predict_proba([CTX])
        assert dist["small blue"] == pytest.approx(0.79, abs=0.005)
        assert sum(dist.values()) == pytest.approx(1.0)

    def test_predict(self):
        assert list(pinned_model().predict([CTX, gen_fig1_context("color")])) == ["small blue", "blue"]

    def test_score(self):
        est = pinned_model()
        y = [Utterance.of(size="small", color="blue"), "small"]
        expected = (np.log(0.7886) * 3 + np.log(0.2064)) / 4
        assert est.score([CTX, CTX], y, sample_weight=[3, 1]) == pytest.approx(expected, abs=0.01)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            SpeakerModel().predict([CTX])

    def test_invalid_params_fail_at_fit(self):
        with pytest.raises(ValueError):
            SpeakerModel(x_size=2.0).fit()
        with pytest.raises(ValueError):
            SpeakerModel(policy="grid").fit()

    @pytest.mark.parametrize("X, y, w", [
        ([], [], None),
        ([CTX], ["small", "big"], None),
        ([CTX], "small", None),
        ([CTX], [3], None),
        ([CTX], ["small"], [0]),
        ([CTX], ["small"], [1.5]),
        (["not a context"], ["small"], None),
    ])
    def test_input_validation(self, X, y, w):
        with pytest.raises(ValueError):
            pinned_model().score(X, y, sample_weight=w)


class TestBayesianSpeaker:
    def test_fit_recovers_direction(self):
        sweep = gen_variation_sweep("size")
        trials = simulate_trials(sweep, fixed_params(0.79, 0.88, beta_i=31.4), PIN_POLICY, 400, 3)
        X = [(t.context_id, t.context) for t in trials]
        y = [t.coded_utterance for t in trials]
        w = [t.count for t in trials]
        est = BayesianSpeaker(n_samples=200, burn_in=1500, lag=2, random_state=4).fit(X, y, sample_weight=w)
        assert set(est.hdi_) == {"x_size", "x_color", "beta_i"}
        assert est.map_values_["x_color"] > 0.5
        assert len(est.trace_) == 200
        assert est.predict([CTX])[0] in {"small", "small blue"}
        clone(est)

    def test_deterministic(self):
        X, y = [CTX, CTX], ["small blue", "small"]
        a = BayesianSpeaker(n_samples=30, burn_in=100, lag=1, random_state=2).fit(X, y)
        b = BayesianSpeaker(n_samples=30, burn_in=100, lag=1, random_state=2).fit(X, y)
        assert a.trace_ == b.trace_

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            BayesianSpeaker().predict_proba([CTX])
