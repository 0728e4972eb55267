"""Test-time-training one-class outlier detection with baselines,
evaluation statistics, and synthetic experiments."""

from .baselines import (
    CvFolds,
    IsolationForestModel,
    KnnModel,
    RandomForestModel,
    rf_fit_predict_cv,
)
from .benchmark import (
    BenchmarkProtocol,
    RunRecord,
    make_oneclass_split,
    run_benchmark,
    sweep_nu,
)
from .data import Dataset, load_dataset, save_dataset
from .losses import (
    LOSS_VARIANTS,
    LossSpec,
    loss_value,
    optimal_weight,
    population_optimum,
)
from .metrics import (
    ScoredSet,
    roc_auc,
    roc_mixture_decomposition_check,
    traintest_to_normalabnormal,
    worst_case_addition_check,
)
from .model import (
    DoustConfig,
    EnsembleModel,
    SplitSpec,
    SubmodelResult,
    feature_bag_mask,
    pretrain,
    refine,
    train_ensemble,
)
from .nn import AdamState, DenseLayer, MlpNetwork, init_network, shifted_sigmoid
from .stats import (
    SignificanceReport,
    friedman_test,
    holm_adjust,
    wilcoxon_holm,
    wilcoxon_signed_rank,
)
from .synthetic import (
    ConditionReport,
    DownsampleSpec,
    GaussianSpec,
    ThoughtConfig,
    bayes_oracle_auc,
    condition_margin,
    gaussian_experiment,
    nu_downsample,
    run_thought_experiment,
    thought_trial,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BenchmarkProtocol",
    "ConditionReport",
    "CvFolds",
    "Dataset",
    "DenseLayer",
    "DoustConfig",
    "DownsampleSpec",
    "EnsembleModel",
    "GaussianSpec",
    "IsolationForestModel",
    "KnnModel",
    "LOSS_VARIANTS",
    "LossSpec",
    "MlpNetwork",
    "RandomForestModel",
    "RunRecord",
    "ScoredSet",
    "SignificanceReport",
    "SplitSpec",
    "SubmodelResult",
    "ThoughtConfig",
    "bayes_oracle_auc",
    "condition_margin",
    "feature_bag_mask",
    "friedman_test",
    "gaussian_experiment",
    "holm_adjust",
    "init_network",
    "load_dataset",
    "loss_value",
    "make_oneclass_split",
    "nu_downsample",
    "optimal_weight",
    "population_optimum",
    "pretrain",
    "refine",
    "rf_fit_predict_cv",
    "roc_auc",
    "roc_mixture_decomposition_check",
    "run_benchmark",
    "run_thought_experiment",
    "save_dataset",
    "shifted_sigmoid",
    "sweep_nu",
    "thought_trial",
    "traintest_to_normalabnormal",
    "train_ensemble",
    "wilcoxon_holm",
    "wilcoxon_signed_rank",
    "worst_case_addition_check",
]
