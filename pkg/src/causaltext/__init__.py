"""Synthetic text benchmarks with known causal effects.

Generates datasets where a latent binary confounder influences both
structured variables and generated text with fully specified strength, then
evaluates text-based treatment-effect estimators against the exact ground
truth of +0.1.
"""

from .classify import (
    BowFeatures,
    ErrorRates,
    LogisticModel,
    LogregConfig,
    SplitSpec,
    accuracy,
    estimate_error_rates,
    featurize,
    train_logreg,
)
from .effects import (
    EffectParams,
    OrderingPair,
    TokenDistribution,
    VocabOrdering,
    apply_effect,
    clamp_normalize,
    effect_pair,
    kendall_tau,
    rank_zipfian,
    sample_ordering_pair,
)
from .estimators import (
    EstimateReport,
    EstimatorConfig,
    baseline_suite,
    crossfit,
    invert_misclassified_joint,
    ipw_ate,
    measurement_error_ate,
    propensity_match_ate,
    representation_match_ate,
)
from .harness import (
    ExperimentConfig,
    GridReport,
    accuracy_error_analysis,
    load_config,
    run_ablation,
    run_grid,
)
from .lda import LdaModel, infer_topic_mixture, train_lda
from .matching import MatchedGroups, full_match, full_match_scalar
from .ngram import NgramLm, SequentialLm, build_ngram_lm
from .structured import (
    StructuredParams,
    StructuredSample,
    draw_structured,
    naive_adjusted_ate,
    oracle_ate,
    plug_in_ate,
    sample_structured_params,
)
from .textgen import (
    Dataset,
    DatasetRecord,
    TextEffectConfig,
    generate_dataset,
    generate_lda,
    generate_sequential,
    generate_trivial,
)
from .vocab import TemplateSet, Vocab

__version__ = "0.1.0"
