"""Differentially private Naive Bayes built on exact smooth sensitivity."""
from .classifier import (
    FitConfig,
    NaiveBayesModel,
    estimate_mean_bunsteinke,
    fit_dp,
    fit_plain,
    predict,
    truncated_normal_log_pdf,
)
from .core import (
    AttributeSpec,
    Dataset,
    DatasetSchema,
    PrivacyBudget,
    allocate_budget,
    load_csv,
    load_schema,
    split_folds,
    validate_dataset,
)
from .estimator import SmoothNaiveBayes
from .exceptions import SmoothNBError
from .noise import NoiseSpec, calibrate_approx, calibrate_global_laplace, calibrate_pure, sample
from .sensitivity import (
    BoundedSample,
    SensitivityReport,
    TrimSpec,
    global_sensitivity,
    k_max_variance_subset,
    k_min_variance_subset,
    local_sensitivity_mean,
    smooth_sensitivity_mean,
    smooth_sensitivity_trimmed_mean,
    smooth_sensitivity_variance,
    trim_sample,
)

__all__ = [
    "AttributeSpec", "BoundedSample", "Dataset", "DatasetSchema", "FitConfig", "NaiveBayesModel", "NoiseSpec",
    "PrivacyBudget", "SensitivityReport", "SmoothNBError", "SmoothNaiveBayes", "TrimSpec", "allocate_budget",
    "calibrate_approx", "calibrate_global_laplace", "calibrate_pure", "estimate_mean_bunsteinke", "fit_dp",
    "fit_plain", "global_sensitivity", "k_max_variance_subset", "k_min_variance_subset", "load_csv",
    "load_schema", "local_sensitivity_mean", "predict", "sample", "smooth_sensitivity_mean",
    "smooth_sensitivity_trimmed_mean", "smooth_sensitivity_variance", "split_folds", "trim_sample",
    "truncated_normal_log_pdf", "validate_dataset",
]
