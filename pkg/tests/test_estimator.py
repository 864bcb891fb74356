import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import cross_val_score

from smoothnb import SmoothNaiveBayes
from smoothnb.classifier import fit_dp, FitConfig, same_parameters
from smoothnb.exceptions import OutOfBounds, UnknownCategory


def _xy(data):
    X = np.array([list(r[0]) for r in data.rows], dtype=object)
    y = np.array([r[1] for r in data.rows], dtype=object)
    return X, y


def test_params_and_clone(mixed):
    est = SmoothNaiveBayes(schema=mixed.schema, mode="dp_global", epsilon=3.0, seed=1)
    params = est.get_params()
    assert params["mode"] == "dp_global" and params["epsilon"] == 3.0
    twin = clone(est)
    assert twin.get_params() == params


def test_fit_predict_matches_library(mixed):
    X, y = _xy(mixed)
    est = SmoothNaiveBayes(schema=mixed.schema, epsilon=2.0, seed=8).fit(X, y)
    ref = fit_dp(mixed, FitConfig(epsilon=2.0, seed=8))
    assert same_parameters(est.model_, ref)
    pred = est.predict(X)
    assert set(pred) <= set(mixed.schema.class_labels)
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    np.testing.assert_array_equal(pred, est.classes_[np.argmax(proba, axis=1)])


def test_plain_cross_val(mixed):
    X, y = _xy(mixed)
    scores = cross_val_score(SmoothNaiveBayes(schema=mixed.schema, mode="plain"), X, y, cv=5)
    assert scores.mean() > 0.8


def test_input_validation(mixed):
    X, y = _xy(mixed)
    est = SmoothNaiveBayes(schema=mixed.schema, mode="plain")
    with pytest.raises(ValueError):
        SmoothNaiveBayes().fit(X, y)
    with pytest.raises(ValueError):
        est.fit(X, y[:-1])
    bad = X.copy()
    bad[0, 0] = 101.0
    with pytest.raises(OutOfBounds):
        est.fit(bad, y)
    est.fit(X, y)
    bad = X[:2].copy()
    bad[1, 3] = "zz"
    with pytest.raises(UnknownCategory):
        est.predict(bad)
    with pytest.raises(ValueError):
        est.predict(X[0])
