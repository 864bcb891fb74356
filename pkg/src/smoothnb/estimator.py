"""scikit-learn compatible wrapper around :mod:`smoothnb.classifier`."""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .classifier import FitConfig, fit_dp, fit_plain, log_scores
from .core import DatasetSchema, validate_dataset, validate_features


def _rows(X):
    if hasattr(X, "to_numpy"):
        X = X.to_numpy(dtype=object)
    X = np.asarray(X, dtype=object)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array of feature rows, got shape {X.shape}")
    return X.tolist()


class SmoothNaiveBayes(ClassifierMixin, BaseEstimator):
    """Naive Bayes that can be trained under differential privacy.

    ``X`` holds raw feature rows in schema order (strings for categorical
    attributes, numbers for numeric ones); ``y`` holds class labels. Every
    value is validated against ``schema`` before any statistic is computed.
    """

    def __init__(self, schema: DatasetSchema | None = None, mode="dp_smooth", noise="cauchy", epsilon=1.0,
                 delta=0.0, numeric_weight=2, trim=None, gamma=2.0, beta_mode="strict",
                 sigma_floor=1e-6, seed=None):
        self.schema = schema
        self.mode = mode
        self.noise = noise
        self.epsilon = epsilon
        self.delta = delta
        self.numeric_weight = numeric_weight
        self.trim = trim
        self.gamma = gamma
        self.beta_mode = beta_mode
        self.sigma_floor = sigma_floor
        self.seed = seed

    def _config(self) -> FitConfig:
        return FitConfig(mode=self.mode, noise=self.noise, epsilon=self.epsilon, delta=self.delta,
                         numeric_weight=self.numeric_weight, trim=self.trim, gamma=self.gamma,
                         beta_mode=self.beta_mode, sigma_floor=self.sigma_floor, seed=self.seed)

    def fit(self, X, y):
        if self.schema is None:
            raise ValueError("SmoothNaiveBayes needs a schema with attribute bounds")
        rows = _rows(X)
        y = np.asarray(y, dtype=object).ravel()
        if len(rows) != len(y):
            raise ValueError(f"X has {len(rows)} rows but y has {len(y)}")
        data = validate_dataset([r + [lab] for r, lab in zip(rows, y)], self.schema)
        cfg = self._config()
        self.model_ = fit_plain(data, cfg.sigma_floor) if cfg.mode == "plain" else fit_dp(data, cfg)
        self.classes_ = np.array(self.schema.class_labels, dtype=object)
        self.n_features_in_ = len(self.schema.attributes)
        return self

    def decision_function(self, X) -> np.ndarray:
        """Joint log scores, shape (n_samples, n_classes)."""
        check_is_fitted(self, "model_")
        return log_scores(self.model_, validate_features(_rows(X), self.schema))

    def predict_log_proba(self, X) -> np.ndarray:
        s = self.decision_function(X)
        return s - logsumexp(s, axis=1, keepdims=True)

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(self.predict_log_proba(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
