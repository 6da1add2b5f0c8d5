"""Rational speech act models of referring-expression production with continuous semantics."""

from .compare import (AISConfig, BayesFactor, ComparisonRow, ais, ais_log_marginal,
                      bayes_factor, bayes_factor_matrix, compare_models, exact_log_marginal_grid)
from .engine import (CostModel, Distribution, EngineError, ModelParams, PredictionTable, cost,
                     literal_listener, pragmatic_listener, prediction_table, speaker, utility)
from .estimator import BayesianSpeaker, SpeakerModel
from .generators import (LabeledContext, gen_fig1_context, gen_koolen_contexts, gen_sim1_grid,
                         gen_variation_sweep)
from .inference import (Trace, Trial, correlate, hdi, log_likelihood, map_estimate, mh_sample,
                        posterior_predictive)
from .scene import (AlternativePolicy, ContextError, FeatureBundle, ReferenceContext, SceneObject,
                    Utterance, enumerate_alternatives, make_context, obj, scene_variation)
from .semantics import (FixedSemanticParams, LexiconSpec, TypicalityTable, load_typicality_table,
                        semantic_value)
from .variants import PRIORS, ModelVariant, PriorSpec, make_variant

__version__ = "0.1.0"
