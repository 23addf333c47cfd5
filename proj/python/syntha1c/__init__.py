"""Tabular T2DM risk modeling toolkit.

Feature assembly from longitudinal measurements, gradient-boosted tree and
MLP classifiers/encoders, rule-based baselines, Monte-Carlo manifold
smoothness and empirical KL shift analysis, plus a seeded synthetic cohort
generator. The heavy lifting lives in the compiled ``_core`` extension.
"""

from ._core import (  # noqa: F401
    Gbdt,
    Mlp,
    Ols,
    __version__,
    assemble,
    bland_altman,
    bmi,
    classification_report,
    derive_label,
    empirical_kl,
    evaluate,
    generate,
    global_smoothness,
    load_samples,
    local_smoothness,
    model_smoothness,
    multi_rule_classify,
    multi_rule_score,
    regression_report,
    schema_features,
    shad,
    shift,
    spearman,
    syntha1c_classify,
    train,
    weighted_random_predict,
    zero_rule_predict,
)

__all__ = [
    "Gbdt",
    "Mlp",
    "Ols",
    "__version__",
    "assemble",
    "bland_altman",
    "bmi",
    "classification_report",
    "derive_label",
    "empirical_kl",
    "evaluate",
    "generate",
    "global_smoothness",
    "load_samples",
    "local_smoothness",
    "model_smoothness",
    "multi_rule_classify",
    "multi_rule_score",
    "regression_report",
    "schema_features",
    "shad",
    "shift",
    "spearman",
    "syntha1c_classify",
    "train",
    "weighted_random_predict",
    "zero_rule_predict",
]
