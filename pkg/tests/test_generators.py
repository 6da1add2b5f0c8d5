import numpy as np
import pytest

from csrsa.engine import prediction_table, speaker
from csrsa.generators import (GENERATORS, KOOLEN_POLICY, PIN_POLICY, SweepSpec, builtin_contexts,
                              fixed_params, gen_banana_contexts, gen_fig1_context,
                              gen_koolen_contexts, gen_sim1_grid, gen_variation_sweep,
                              get_generator, koolen_params)
from csrsa.scene import ContextError, enumerate_alternatives, scene_variation
from csrsa.variants import (PRIORS, VARIANT_NAMES, ModelVariant, PriorSpec, VariantError,
                            exp1_variant, make_variant)
from csrsa.golden import banana_typicalities


class TestFig1:
    def test_color_mirror(self):
        ctx = gen_fig1_context("color")
        assert ctx.target.id == "small_blue"
        others = [o for o in ctx.distractors]
        assert all(o.features.color != "blue" for o in others)
        assert any(o.features.size == "small" for o in others)

    def test_invalid(self):
        with pytest.raises(ContextError):
            gen_fig1_context("type")


class TestSim1Grid:
    def test_product(self):
        grid = gen_sim1_grid([0.8, 0.9], [0.99, 0.5, 0.7], [1, 30])
        assert len(grid) == 12
        assert all(ctx == gen_fig1_context("size") for _, ctx in grid)

    def test_redundant_cell(self):
        (params, ctx), = gen_sim1_grid([0.8], [0.99], [30])
        alts = enumerate_alternatives(ctx, PIN_POLICY)
        p = {u.text: v for u, v in zip(alts, speaker(ctx, ctx.target_id, params, alts).probs)}
        assert p["small blue"] > p["small"]

    def test_equal_informativeness(self):
        (params, ctx), = gen_sim1_grid([0.999], [0.999], [30])
        alts = enumerate_alternatives(ctx, PIN_POLICY)
        p = {u.text: v for u, v in zip(alts, speaker(ctx, ctx.target_id, params, alts).probs)}
        assert p["small blue"] == pytest.approx(p["small"], abs=0.05)
        assert p["small blue"] + p["small"] > 0.9

    def test_empty_axis(self):
        with pytest.raises(ContextError):
            gen_sim1_grid([], [0.5])


class TestKoolen:
    def test_four_scenes(self):
        labels = [c.label for c in gen_koolen_contexts()]
        assert labels == ["exp1-low", "exp1-high", "exp2-low", "exp2-high"]

    def test_high_beats_low(self):
        table = prediction_table(gen_koolen_contexts(), koolen_params(), KOOLEN_POLICY)
        for study in ("exp1", "exp2"):
            assert table.mention_mass(f"{study}-high", "color") > table.mention_mass(f"{study}-low", "color")

    def test_low_variation_is_low(self):
        table = prediction_table(gen_koolen_contexts(), koolen_params(), KOOLEN_POLICY)
        assert table.mention_mass("exp1-low", "color") < 0.5


class TestVariationSweep:
    def test_counts(self):
        sweep = gen_variation_sweep()
        assert len([c for c in sweep if c.meta["sufficient"] == "size"]) == 9
        assert len(sweep) == 18

    def test_two_distractors(self):
        values = {c.meta["variation"] for c in gen_variation_sweep("size") if c.meta["n_total"] == 2}
        assert values == {0.0, 0.5}

    @pytest.mark.parametrize("c", gen_variation_sweep(), ids=lambda c: c.label)
    def test_insufficient_stays_insufficient(self, c):
        ctx, redundant, dim = c.context, c.meta["redundant"], c.meta["sufficient"]
        target = ctx.target.features
        assert any(o.features.value(redundant) == target.value(redundant) for o in ctx.distractors)
        assert all(o.features.value(dim) != target.value(dim) for o in ctx.distractors)
        assert scene_variation(ctx, redundant) == c.meta["variation"]

    def test_deterministic(self):
        assert gen_variation_sweep() == gen_variation_sweep()

    def test_redundant_probability_non_decreasing_in_variation(self):
        sweep = gen_variation_sweep("size")
        params = fixed_params(0.8, 0.999, 0.9, beta_i=30.0, cost=koolen_params().cost)
        table = prediction_table(sweep, params, PIN_POLICY)
        pairs = sorted((c.meta["variation"], table.class_mass(c.label, "size-and-color"), c.label) for c in sweep)
        drops = [(a[2], b[2]) for a, b in zip(pairs, pairs[1:]) if b[0] > a[0] and b[1] < a[1] - 1e-12]
        assert not drops


class TestBanana:
    def test_typicality_gradient(self):
        labels = [c.label for c in gen_banana_contexts()]
        assert labels == ["banana-yellow", "banana-brown", "banana-blue"]

    def test_bundled_typicality_lookup(self):
        t = banana_typicalities()
        assert t.get("banana", "blue_banana") == pytest.approx(0.42)


class TestRegistry:
    def test_known(self):
        assert set(GENERATORS) == {"fig1", "fig1-color", "koolen", "variation", "banana"}
        assert all(get_generator(n).make() == get_generator(n).make() for n in GENERATORS)

    def test_unknown(self):
        with pytest.raises(ContextError):
            get_generator("nope")

    def test_builtin_labels_unique(self):
        n = sum(len(g.make()) for g in GENERATORS.values())
        assert len(builtin_contexts()) == n

    def test_sweep_spec(self):
        spec = SweepSpec({"x_size": [0.7, 0.8], "beta_i": [1]}, "fig1")
        assert spec.points() == [{"x_size": 0.7, "beta_i": 1.0}, {"x_size": 0.8, "beta_i": 1.0}]
        with pytest.raises(ContextError):
            SweepSpec({}, "fig1")
        with pytest.raises(ContextError):
            SweepSpec({"x_size": []}, "fig1")
        with pytest.raises(ContextError):
            SweepSpec({"x_size": [1]}, "nope")


class TestVariants:
    def test_prior_presets(self):
        assert PRIORS["exp1"].bounds["beta_i"] == (0, 40)
        assert PRIORS["exp3"].bounds["beta_i"] == (0, 20)
        assert PRIORS["exp3"].bounds["beta_L"] == (0, 5)

    def test_prior_bounds_checked(self):
        with pytest.raises(VariantError):
            PriorSpec({"a": (1, 1)})

    def test_log_density(self):
        p = PriorSpec({"a": (0, 2), "b": (0, 5)})
        out = p.log_density(np.array([[1, 1], [3, 1]]))
        assert out[0] == pytest.approx(-np.log(10)) and out[1] == -np.inf

    def test_restrict(self):
        with pytest.raises(VariantError):
            PRIORS["exp3"].restrict(["x_size"])

    def test_variant_params(self):
        v = exp1_variant(True)
        p = v.params({"x_size": 0.7, "x_color": 0.9, "beta_i": 5, "beta_c_size": 1, "beta_c_color": 2})
        assert p.lexicon.fixed_params.x_size == 0.7
        assert p.cost.per_slot == {"size": 1.0, "color": 2.0}
        assert p.beta_i == 5

    def test_every_name_builds(self):
        table = banana_typicalities()
        freq = {"x": 0.0}
        for name in VARIANT_NAMES:
            v = make_variant(name, table, freq, freq)
            assert v.name == name
            v.prior(PRIORS[name[:4]])

    def test_unknown_free(self):
        with pytest.raises(VariantError):
            ModelVariant("bad", ("lambda",), fixed_params())
        with pytest.raises(VariantError):
            make_variant("exp9")
