"""Stacked generalization for classification.

Base learners emit class-probability vectors; cross-validation assembles
their held-out outputs into meta-features; a combiner (by default one
non-negative least-squares regression per class) learns to merge them.
Baselines, synthetic generators and an experiment harness round it out.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .data import (
    Attribute,
    AttributeKind,
    Dataset,
    FoldPlan,
    Instance,
    Schema,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    split,
    stratified_folds,
)
from .synth import Led24Params, WaveformParams, gen_led24, gen_waveform
from .learners import (
    KnnLearner,
    NaiveBayesLearner,
    TreeLearner,
    TreeParams,
    default_level0,
    predict_class,
)
from .mlr import (
    FeatureScope,
    MlrKind,
    MlrVariant,
    WeightMatrix,
    fit_mlr,
    mlr_predict,
    one_hot_responses,
    solve_nnls,
    solve_ols,
)
from .stacking import (
    Level1Dataset,
    Representation,
    StackedModel,
    build_level1_data,
    fit_stacked,
    load_model,
    save_model,
    stacked_predict,
)
from .baselines import (
    BaggedEnsemble,
    SelectionResult,
    average_probs,
    bagged_predict,
    best_cv,
    fit_bagging,
    majority_vote,
)
from .harness import (
    EvalResult,
    GenSpec,
    Report,
    emit_report,
    outer_cv_eval,
    parse_method,
    repeated_trials_eval,
    se_count,
)
