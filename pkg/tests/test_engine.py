import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from csrsa.engine import (CostModel, EngineError, ModelParams, compile_contexts, cost,
                          empirical_cost_model, literal_listener, pragmatic_listener,
                          prediction_table, speaker, speaker_log_tensor,
                          speaker_target_log_tensor, utility)
from csrsa.generators import PIN_POLICY, fixed_params, gen_fig1_context
from csrsa.scene import Utterance, enumerate_alternatives, make_context, obj
from csrsa.semantics import LexiconSpec

CTX = gen_fig1_context("size")
ALTS = enumerate_alternatives(CTX, PIN_POLICY)
BOOL = ModelParams(1.0, LexiconSpec("boolean"))


def cont(beta_i=1.0, xs=0.8, xc=0.99, **kw):
    return fixed_params(xs, xc, beta_i=beta_i, **kw)


def by_text(dist):
    return {u.text: p for u, p in zip(dist.support, dist.probs)}


class TestCost:
    def test_fixed_sum(self):
        cm = CostModel("fixed-per-slot", {"size": 1, "color": 1})
        assert cost(Utterance.of(size="small", color="blue"), cm) == 2

    def test_none(self):
        assert cost(Utterance.of(size="small"), CostModel()) == 0

    def test_empirical(self):
        cm = CostModel("empirical", beta_F=0.0, beta_L=2.69, freq_table={"blue": 0.9},
                       len_table={"blue": 0.5})
        assert cost(Utterance.of(color="blue"), cm) == pytest.approx(1.345)

    def test_empirical_miss(self):
        cm = CostModel("empirical", beta_L=1.0, freq_table={}, len_table={})
        with pytest.raises(EngineError):
            cost(Utterance.of(color="blue"), cm)

    def test_minmax_is_global(self):
        cm = empirical_cost_model({"a": 2.0, "b": 4.0, "c": 3.0}, {"a": 1, "b": 1, "c": 1}, 1.0, 0.0)
        assert cm.freq_table == {"a": 0.0, "b": 1.0, "c": 0.5}
        assert set(cm.len_table.values()) == {0.0}

    def test_negative_weights(self):
        with pytest.raises(EngineError):
            CostModel("fixed-per-slot", {"size": -1})


class TestLiteralListener:
    @pytest.mark.parametrize("u, expected", [
        (Utterance.of(size="small"), (0.26, 0.26, 0.48)),
        (Utterance.of(color="red"), (0.21, 0.57, 0.21)),
    ])
    def test_continuous_cells(self, u, expected):
        d = literal_listener(CTX, u, cont())
        assert d.support == ("big_blue", "big_red", "small_blue")
        assert d.probs == pytest.approx(expected, abs=0.005)

    def test_boolean_blue(self):
        assert literal_listener(CTX, Utterance.of(color="blue"), BOOL).probs == pytest.approx((0.5, 0, 0.5))

    def test_boolean_no_support(self):
        with pytest.raises(EngineError):
            literal_listener(CTX, Utterance.of(color="green"), BOOL)

    @pytest.mark.parametrize("u", ALTS, ids=lambda u: u.text)
    def test_matches_oracle(self, u):
        x = {"size": 0.8, "color": 0.99, "type": 1.0}
        ref = oracles.literal(oracles.PINS, u.terms, x)
        assert literal_listener(CTX, u, cont()).as_dict() == pytest.approx(ref, abs=1e-12)


class TestUtilityAndSpeaker:
    def test_utility_log_cell(self):
        value = utility(Utterance.of(size="small"), "small_blue", CTX, cont())
        ref = math.log(oracles.literal(oracles.PINS, (("size", "small"),),
                                       {"size": 0.8, "color": 0.99})["small_blue"])
        assert value == pytest.approx(ref, abs=1e-12)
        assert value == pytest.approx(math.log(0.48), abs=0.01)

    def test_utility_zero_beta(self):
        assert utility(Utterance.of(size="small"), "small_blue", CTX, cont(0.0)) == 0.0

    def test_utility_boolean_false(self):
        assert utility(Utterance.of(color="red"), "small_blue", CTX, BOOL) == -math.inf

    def test_speaker_column_beta1(self):
        got = by_text(speaker(CTX, "small_blue", cont(1.0), ALTS))
        expected = {"small": .20, "small blue": .21, "blue": .18, "big blue": .12, "big red": .10,
                    "big": .09, "red": .09}
        assert got == pytest.approx(expected, abs=0.005)

    def test_speaker_column_beta30(self):
        got = by_text(speaker(CTX, "small_blue", cont(30.0), ALTS))
        assert got["small blue"] == pytest.approx(0.79, abs=0.005)
        assert got["small"] == pytest.approx(0.21, abs=0.005)

    def test_uniform_at_zero_beta(self):
        assert speaker(CTX, "small_blue", cont(0.0), ALTS).probs == pytest.approx([1 / 7] * 7, abs=1e-12)

    @pytest.mark.parametrize("target", CTX.ids)
    @pytest.mark.parametrize("beta_i", [0.5, 1.0, 30.0])
    def test_matches_oracle(self, target, beta_i):
        x = {"size": 0.8, "color": 0.99}
        ref = oracles.speaker(oracles.PINS, oracles.PIN_UTTERANCES, target, beta_i, x)
        assert by_text(speaker(CTX, target, cont(beta_i), ALTS)) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("target", CTX.ids)
    def test_boolean_matches_oracle(self, target):
        ref = oracles.speaker(oracles.PINS, oracles.PIN_UTTERANCES, target, 1.0)
        assert by_text(speaker(CTX, target, BOOL, ALTS)) == pytest.approx(ref, abs=1e-12)

    def test_all_infinite_is_error(self):
        with pytest.raises(EngineError):
            speaker(CTX, "small_blue", BOOL, [Utterance.of(color="red")])

    def test_target_tensor_agrees_with_full(self):
        cc = compile_contexts([CTX, gen_fig1_context("color")], PIN_POLICY)
        values = {"x_size": np.array([0.8, 0.6]), "x_color": np.array([0.99, 0.7]),
                  "x_type": 1.0, "beta_i": np.array([30.0, 2.0]), "beta_t": 1.0}
        lex = cont().lexicon
        full = speaker_log_tensor(cc, lex, CostModel(), values)
        target = speaker_target_log_tensor(cc, lex, CostModel(), values)
        ref = np.take_along_axis(full, cc.targets[None, :, None, None], axis=3)[..., 0]
        np.testing.assert_allclose(target, ref, atol=1e-12)


class TestPragmaticListener:
    def test_delta_prior(self):
        ctx = make_context(CTX.objects, "small_blue", {"big_blue": 0, "big_red": 0, "small_blue": 1})
        d = pragmatic_listener(ctx, Utterance.of(color="blue"), cont(30.0), ALTS)
        assert d.as_dict() == {"big_blue": 0.0, "big_red": 0.0, "small_blue": 1.0}

    def test_brute_force(self):
        u = Utterance.of(size="small", color="blue")
        ref = oracles.pragmatic_listener(oracles.PINS, oracles.PIN_UTTERANCES, "small blue", 30.0,
                                         {"size": 0.8, "color": 0.99})
        assert pragmatic_listener(CTX, u, cont(30.0), ALTS).as_dict() == pytest.approx(ref, abs=1e-10)

    def test_boolean_red(self):
        d = pragmatic_listener(CTX, Utterance.of(color="red"), BOOL, ALTS)
        assert d.as_dict() == {"big_blue": 0.0, "big_red": 1.0, "small_blue": 0.0}

    def test_not_an_alternative(self):
        with pytest.raises(EngineError):
            pragmatic_listener(CTX, Utterance.of(color="green"), BOOL, ALTS)


class TestPredictionTable:
    def test_fig1_column(self):
        table = prediction_table([("fig1", CTX)], cont(30.0), PIN_POLICY)
        col = table.column("fig1")
        assert col["small blue"] == pytest.approx(0.79, abs=0.005)
        assert table.class_mass("fig1", "size-and-color") == pytest.approx(col["small blue"] + col["big blue"]
                                                                           + col["big red"])
        assert table.mention_mass("fig1", "color") == pytest.approx(
            sum(p for u, p in col.items() if u not in ("small", "big")))

    def test_empty(self):
        assert len(prediction_table([], cont())) == 0


# ---------------------------------------------------------------------------
# properties

unit = st.floats(0.01, 0.99)
betas = st.floats(0.0, 40.0)
sizes = st.sampled_from(["big", "small", "medium"])
colors = st.sampled_from(["blue", "red", "green"])
scenes = st.lists(st.tuples(sizes, colors), min_size=2, max_size=5)


def scene(feats, names=None):
    names = names or [f"o{i}" for i in range(len(feats))]
    return make_context([obj(n, "pin", s, c) for n, (s, c) in zip(names, feats)], names[0])


@given(scenes, unit, unit, betas, st.booleans())
def test_distributions_normalised(feats, xs, xc, bi, boolean):
    ctx = scene(feats)
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    params = BOOL.with_values(beta_i=bi) if boolean else cont(bi, xs, xc)
    s = speaker(ctx, ctx.target_id, params, alts)
    assert min(s.probs) >= 0 and abs(sum(s.probs) - 1) < 1e-9
    for u in alts:
        if boolean and not any(u.is_true_of(o) for o in ctx.objects):
            continue
        l0 = literal_listener(ctx, u, params)
        assert min(l0.probs) >= 0 and abs(sum(l0.probs) - 1) < 1e-9
    u = s.argmax()
    l1 = pragmatic_listener(ctx, u, params, alts)
    assert min(l1.probs) >= 0 and abs(sum(l1.probs) - 1) < 1e-9


@given(scenes, unit, unit, betas)
def test_speaker_matches_oracle(feats, xs, xc, bi):
    ctx = scene(feats)
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    objs = {o.id: (o.features.size, o.features.color, "pin") for o in ctx.objects}
    utts = {u.text: u.terms for u in alts}
    ref = oracles.speaker(objs, utts, ctx.target_id, bi, {"size": xs, "color": xc})
    assert by_text(speaker(ctx, ctx.target_id, cont(bi, xs, xc), alts)) == pytest.approx(ref, abs=1e-9)


@given(scenes)
def test_boolean_literal_uniform_over_true(feats):
    ctx = scene(feats)
    for u in enumerate_alternatives(ctx, PIN_POLICY):
        truth = [u.is_true_of(o) for o in ctx.objects]
        d = literal_listener(ctx, u, BOOL)
        assert d.probs == pytest.approx([t / sum(truth) for t in truth], abs=1e-12)


@given(scenes, unit, unit, st.floats(-3, 3))
def test_exponentiated_rule_shift_invariance(feats, xs, xc, shift):
    ctx = scene(feats)
    u = enumerate_alternatives(ctx, PIN_POLICY)[0]
    objs = {o.id: (o.features.size, o.features.color, "pin") for o in ctx.objects}
    x = {"size": xs, "color": xc}
    w = {o: math.exp(oracles.meaning(u.terms, f, x) + shift) for o, f in objs.items()}
    z = sum(w.values())
    assert literal_listener(ctx, u, cont(1.0, xs, xc)).as_dict() == pytest.approx(
        {o: v / z for o, v in w.items()}, abs=1e-12)


@given(scenes, unit, unit, st.floats(0.5, 20), st.floats(0.01, 3), st.integers(0, 20))
def test_cost_monotone(feats, xs, xc, bi, extra, which):
    ctx = scene(feats)
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    u = alts[which % len(alts)]
    slot = u.slots[0]
    base = cont(bi, xs, xc, cost=CostModel("fixed-per-slot", {"size": 0.5, "color": 0.5}))
    dearer = base.with_values(**{f"beta_c_{slot}": 0.5 + extra})
    p0 = speaker(ctx, ctx.target_id, base, alts)[u]
    p1 = speaker(ctx, ctx.target_id, dearer, alts)[u]
    if 1e-12 < p0 < 1 - 1e-12:
        assert p1 < p0


@given(scenes, unit, unit)
def test_zero_beta_uniform(feats, xs, xc):
    ctx = scene(feats)
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    assert speaker(ctx, ctx.target_id, cont(0.0, xs, xc), alts).probs == pytest.approx(
        [1 / len(alts)] * len(alts), abs=1e-12)


@given(scenes, unit, unit)
def test_high_rationality_picks_argmax(feats, xs, xc):
    ctx = scene(feats)
    alts = enumerate_alternatives(ctx, PIN_POLICY)
    l0 = {u: literal_listener(ctx, u, cont(1.0, xs, xc))[ctx.target_id] for u in alts}
    best = max(l0.values())
    winners = [u for u, v in l0.items() if v == best]
    runner_up = max((v for v in l0.values() if v < best), default=0.0)
    if len(winners) == 1 and 1000 * (math.log(best) - math.log(runner_up or 1e-300)) > 50:
        assert speaker(ctx, ctx.target_id, cont(1000.0, xs, xc), alts)[winners[0]] > 1 - 1e-9


@given(scenes, st.randoms(), unit, unit, st.floats(0.5, 30))
def test_permutation_commutes(feats, rnd, xs, xc, bi):
    names = [f"o{i}" for i in range(len(feats))]
    shuffled = names[:]
    rnd.shuffle(shuffled)
    a, b = scene(feats, names), scene(feats, shuffled)
    alts = enumerate_alternatives(a, PIN_POLICY)
    params = cont(bi, xs, xc)
    rename = dict(zip(names, shuffled))
    for u in alts:
        la, lb = literal_listener(a, u, params).as_dict(), literal_listener(b, u, params).as_dict()
        assert {rename[k]: v for k, v in la.items()} == pytest.approx(lb, abs=1e-12)
    assert by_text(speaker(a, names[0], params, alts)) == pytest.approx(
        by_text(speaker(b, shuffled[0], params, alts)), abs=1e-12)
    u = alts[0]
    l1a, l1b = pragmatic_listener(a, u, params, alts).as_dict(), pragmatic_listener(b, u, params, alts).as_dict()
    assert {rename[k]: v for k, v in l1a.items()} == pytest.approx(l1b, abs=1e-12)


def test_redundancy_asymmetry():
    p = by_text(speaker(CTX, "small_blue", cont(30.0), ALTS))
    assert p["small blue"] > p["small"]
    q = by_text(speaker(CTX, "big_red", cont(30.0), ALTS))
    assert q["red"] > q["big red"]
    swapped = by_text(speaker(CTX, "small_blue", cont(30.0, 0.99, 0.8), ALTS))
    assert swapped["small"] > swapped["small blue"]
