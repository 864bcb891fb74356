"""Naive Bayes with categorical counts and truncated-normal numeric likelihoods,
trained either exactly or under differential privacy.

Private training releases, per attribute, noisy joint counts (categorical) or
a noisy mean and variance per class (numeric), plus noisy class counts once.
Every release draws from its own generator in a seed hierarchy keyed by
(attribute, class, statistic), so results do not depend on evaluation order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special

from . import noise as nz
from .core import (
    PRIOR_LABEL,
    Dataset,
    DatasetSchema,
    PrivacyBudget,
    allocate_budget,
    as_fraction,
    categorical_label,
    mean_label,
    variance_label,
)
from .exceptions import DegenerateClass, DeltaOutOfRange, ModelFormatError, OutOfBounds, TrimTooLarge
from .sensitivity import (
    BoundedSample,
    TrimSpec,
    global_sensitivity,
    population_variance,
    smooth_sensitivity_mean,
    smooth_sensitivity_trimmed_mean,
    smooth_sensitivity_variance,
    trim_sample,
)

MODES = ("plain", "dp_smooth", "dp_global", "dp_bunsteinke")
MODEL_FORMAT = "smoothnb-model"
MODEL_VERSION = 1

# seed-hierarchy keys
_PRIORS, _CATEGORICAL, _NUMERIC = 0, 1, 2
_MEAN, _VAR, _FIRST, _SECOND = 0, 1, 2, 3


@dataclass(frozen=True)
class FitConfig:
    mode: str = "dp_smooth"
    noise: str = "cauchy"
    epsilon: float = 1.0
    delta: float = 0.0
    numeric_weight: object = 2
    trim: int | None = None
    gamma: float = 2.0
    beta_mode: str = "strict"
    sigma_floor: float = 1e-6
    seed: int | None = None
    prune: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "plain":
            return
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.noise not in ("cauchy", "gaussian"):
            raise ValueError(f"noise must be 'cauchy' or 'gaussian', got {self.noise!r}")
        if self.noise == "gaussian" and not 0 < self.delta < 1:
            raise DeltaOutOfRange(f"gaussian noise needs 0 < delta < 1, got {self.delta}")
        if self.noise == "cauchy" and self.delta != 0:
            raise DeltaOutOfRange("cauchy noise is pure DP; delta must be 0")
        if self.beta_mode not in ("paper", "strict"):
            raise ValueError(f"beta_mode must be 'paper' or 'strict', got {self.beta_mode!r}")
        if self.trim is not None and self.trim < 0:
            raise TrimTooLarge(f"trim must be >= 0, got {self.trim}")


@dataclass(frozen=True)
class CategoricalParams:
    counts: np.ndarray  # (K, J) smoothed-input counts, >= 0
    probs: np.ndarray   # (K, J) rows sum to 1


@dataclass(frozen=True)
class NumericParams:
    mu: np.ndarray      # (K,)
    sigma: np.ndarray   # (K,)
    lower: float
    upper: float


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    schema: DatasetSchema
    class_counts: np.ndarray
    priors: np.ndarray
    params: tuple
    metadata: dict = field(default_factory=dict)
    budget: PrivacyBudget | None = None
    provenance: tuple = ()

    def to_dict(self) -> dict:
        params = []
        for a, p in zip(self.schema.attributes, self.params):
            if a.is_numeric:
                params.append({"attribute": a.name, "kind": "numeric",
                               "mu": p.mu.tolist(), "sigma": p.sigma.tolist()})
            else:
                params.append({"attribute": a.name, "kind": "categorical",
                               "counts": p.counts.tolist(), "probs": p.probs.tolist()})
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "schema": self.schema.to_dict(),
            "schema_sha256": self.schema.fingerprint(),
            "metadata": self.metadata,
            "budget": None if self.budget is None else self.budget.to_dict(),
            "class_counts": self.class_counts.tolist(),
            "priors": self.priors.tolist(),
            "parameters": params,
            "provenance": list(self.provenance),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "NaiveBayesModel":
        if d.get("format") != MODEL_FORMAT:
            raise ModelFormatError("not a smoothnb model file")
        if d.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
        schema = DatasetSchema.from_dict(d["schema"])
        if schema.fingerprint() != d.get("schema_sha256"):
            raise ModelFormatError("schema hash mismatch; the file was edited or is corrupt")
        params = []
        for a, p in zip(schema.attributes, d["parameters"]):
            if p["attribute"] != a.name:
                raise ModelFormatError(f"parameter block for {p['attribute']!r} does not match schema")
            if a.is_numeric:
                params.append(NumericParams(np.array(p["mu"], float), np.array(p["sigma"], float), a.lower, a.upper))
            else:
                params.append(CategoricalParams(np.array(p["counts"], float), np.array(p["probs"], float)))
        budget = None if d.get("budget") is None else PrivacyBudget.from_dict(d["budget"])
        return cls(schema, np.array(d["class_counts"], float), np.array(d["priors"], float), tuple(params),
                   dict(d.get("metadata", {})), budget, tuple(d.get("provenance", ())))

    @classmethod
    def from_json(cls, text: str) -> "NaiveBayesModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not JSON: {exc}") from None
        return cls.from_dict(doc)


# ---------------------------------------------------------------------------
# helpers


def _joint_counts(dataset: Dataset, j: int) -> np.ndarray:
    attr = dataset.schema.attributes[j]
    K, J = dataset.schema.n_classes, len(attr.values)
    flat = np.bincount(dataset.labels * J + dataset.columns[j], minlength=K * J)
    return flat.reshape(K, J).astype(float)


def _smoothed_probs(counts: np.ndarray) -> np.ndarray:
    J = counts.shape[1]
    return (counts + 1.0) / (counts.sum(axis=1, keepdims=True) + J)


def _class_values(dataset: Dataset, j: int, c: int) -> np.ndarray:
    return dataset.columns[j][dataset.labels == c]


def _check_cell(values, attr, label):
    if values.size < 2:
        raise DegenerateClass(attr.name, label, int(values.size))


def _sigma_floor(attr, ratio):
    return ratio * (attr.upper - attr.lower)


def fit_plain(dataset: Dataset, sigma_floor: float = 1e-6) -> NaiveBayesModel:
    """Exact maximum-likelihood fit with add-one smoothing of categorical counts."""
    schema = dataset.schema
    counts = dataset.class_counts().astype(float)
    params = []
    for j, attr in enumerate(schema.attributes):
        if attr.is_numeric:
            mu, sd = np.empty(schema.n_classes), np.empty(schema.n_classes)
            for c, label in enumerate(schema.class_labels):
                v = _class_values(dataset, j, c)
                _check_cell(v, attr, label)
                mu[c] = v.mean()
                sd[c] = max(math.sqrt(population_variance(v)), _sigma_floor(attr, sigma_floor))
            params.append(NumericParams(mu, sd, attr.lower, attr.upper))
        else:
            table = _joint_counts(dataset, j)
            params.append(CategoricalParams(table, _smoothed_probs(table)))
    priors = counts / counts.sum()
    return NaiveBayesModel(schema, counts, priors, tuple(params), {"mode": "plain", "n": dataset.n})


# ---------------------------------------------------------------------------
# private releases


def _calibrate(sensitivity, eps, config: FitConfig, delta_i, beta):
    if config.noise == "gaussian":
        return nz.calibrate_approx(sensitivity, eps, delta_i)
    return nz.calibrate_pure(sensitivity, eps, config.gamma, config.beta_mode, beta)


def _beta(eps, config: FitConfig, delta_i):
    return nz.smoothing_beta(eps, config.beta_mode, config.gamma, delta_i if config.noise == "gaussian" else 0.0)


def _second_moment_bounds(lo, hi):
    if lo >= 0:
        return lo * lo, hi * hi
    if hi <= 0:
        return hi * hi, lo * lo
    return 0.0, max(lo * lo, hi * hi)


def default_trim(mode: str, n: int, requested: int | None = None) -> int:
    """Trim per side for one cell, reduced so at least two values survive."""
    if requested is None:
        requested = max(1, math.ceil(0.01 * n)) if mode == "dp_bunsteinke" else 0
    return max(0, min(requested, (n - 2) // 2))


def _bunsteinke_release(sample: BoundedSample, trim: TrimSpec, eps, rng, *, beta=None, mode="strict",
                        gamma=2.0, delta=0.0, prune=False):
    if sample.n - 2 * trim.m < 1:
        raise TrimTooLarge(f"cannot trim {trim.m} from each side of {sample.n} values")
    if beta is None:
        beta = nz.smoothing_beta(eps, mode, gamma, delta)
    report = smooth_sensitivity_trimmed_mean(sample, trim, beta, prune)
    if delta > 0:
        spec = nz.calibrate_approx(report.smooth, eps, delta)
    else:
        spec = nz.calibrate_pure(report.smooth, eps, gamma, mode, beta)
    raw = float(trim_sample(sample, trim).values.mean()) + nz.sample(spec, rng)
    return min(max(raw, sample.lower), sample.upper), spec, report


def estimate_mean_bunsteinke(sample: BoundedSample, trim: TrimSpec, epsilon_access: float,
                             beta: float | None = None, *, rng=None, mode: str = "strict",
                             gamma: float = 2.0, delta: float = 0.0) -> float:
    """Trimmed mean plus noise scaled to its smooth sensitivity, projected onto
    the sample bounds."""
    if rng is None:
        rng = np.random.default_rng()
    return _bunsteinke_release(sample, trim, epsilon_access, rng, beta=beta, mode=mode,
                               gamma=gamma, delta=delta)[0]


def _provenance(kind, attr, label, spec, report=None, trim=0):
    rec = {"parameter": kind, "attribute": attr, "class": label, "noise": spec.to_dict(), "trim": trim}
    if report is not None:
        rec["sensitivity"] = {"statistic": report.statistic, "local": report.local, "smooth": report.smooth,
                              "beta": report.beta, "k_max": report.k_max}
    return rec


def fit_dp(dataset: Dataset, config: FitConfig) -> NaiveBayesModel:
    """Differentially private fit; the returned model's budget ledger sums to
    ``config.epsilon`` exactly."""
    if config.mode == "plain":
        return fit_plain(dataset, config.sigma_floor)
    schema = dataset.schema
    K = schema.n_classes
    seed = config.seed if config.seed is not None else int(np.random.SeedSequence().entropy % 2**63)

    budget = allocate_budget(config.epsilon, schema, config.numeric_weight,
                             config.delta if config.noise == "gaussian" else 0)
    if config.mode == "dp_bunsteinke":
        for a in schema.attributes:
            if a.is_numeric:
                budget = budget.split(variance_label(a.name), [
                    (f"numeric:{a.name}:first_moment", Fraction(1, 2)),
                    (f"numeric:{a.name}:second_moment", Fraction(1, 2)),
                ])
    if config.noise == "gaussian":
        budget = budget.with_delta([e.label for e in budget.accesses if e.label.startswith("numeric:")])

    provenance = []
    params = []
    for j, attr in enumerate(schema.attributes):
        if not attr.is_numeric:
            eps = budget.epsilon_for(categorical_label(attr.name))
            table = _joint_counts(dataset, j)
            spec = nz.calibrate_global_laplace(1.0, eps)
            noisy = np.maximum(table + nz.sample(spec, nz.child_rng(seed, _CATEGORICAL, j), size=table.shape), 0.0)
            params.append(CategoricalParams(noisy, _smoothed_probs(noisy)))
            provenance.append(_provenance("counts", attr.name, None, spec))
            continue
        mu = np.empty(K)
        var = np.empty(K)
        for c, label in enumerate(schema.class_labels):
            values = _class_values(dataset, j, c)
            _check_cell(values, attr, label)
            sample = BoundedSample(values, attr.lower, attr.upper)
            mu[c], var[c], recs = _numeric_cell(sample, attr.name, label, j, c, budget, config, seed)
            provenance.extend(recs)
        lo, hi = attr.lower, attr.upper
        mu = np.clip(mu, lo, hi)
        var = np.clip(var, 0.0, (hi - lo) ** 2 / 4.0)
        sigma = np.maximum(np.sqrt(var), _sigma_floor(attr, config.sigma_floor))
        params.append(NumericParams(mu, sigma, lo, hi))

    eps = budget.epsilon_for(PRIOR_LABEL)
    spec = nz.count_cauchy(eps)
    counts = dataset.class_counts().astype(float)
    noisy = np.maximum(counts + nz.sample(spec, nz.child_rng(seed, _PRIORS), size=K), 0.0)
    priors = noisy / noisy.sum() if noisy.sum() > 0 else np.full(K, 1.0 / K)
    provenance.append(_provenance("class_counts", None, None, spec))

    meta = {
        "mode": config.mode, "noise": config.noise, "epsilon": config.epsilon,
        "delta": config.delta if config.noise == "gaussian" else 0.0,
        "numeric_weight": str(as_fraction(config.numeric_weight)), "trim": config.trim,
        "gamma": config.gamma, "beta_mode": config.beta_mode, "sigma_floor": config.sigma_floor,
        "seed": seed, "n": dataset.n, "per_access_epsilon": str(budget.per_access_epsilon),
    }
    return NaiveBayesModel(schema, noisy, priors, tuple(params), meta, budget, tuple(provenance))


def _numeric_cell(sample, name, label, j, c, budget: PrivacyBudget, config: FitConfig, seed):
    """Noisy (mean, variance) for one (attribute, class) cell."""
    recs = []
    rng = lambda stat: nz.child_rng(seed, _NUMERIC, j, c, stat)  # noqa: E731
    mean_entry = budget.entry(mean_label(name))
    eps_mu, d_mu = float(mean_entry.epsilon), float(mean_entry.delta)

    if config.mode == "dp_global":
        bounds = (sample.lower, sample.upper)
        gs_mu = global_sensitivity("mean", bounds, sample.n)
        gs_var = global_sensitivity("variance", bounds, sample.n)
        var_entry = budget.entry(variance_label(name))
        if config.noise == "gaussian":
            spec_mu = nz.calibrate_approx(gs_mu, eps_mu, d_mu)
            spec_var = nz.calibrate_approx(gs_var, float(var_entry.epsilon), float(var_entry.delta))
        else:
            spec_mu = nz.calibrate_global_laplace(gs_mu, eps_mu)
            spec_var = nz.calibrate_global_laplace(gs_var, float(var_entry.epsilon))
        mu = sample.values.mean() + nz.sample(spec_mu, rng(_MEAN))
        var = population_variance(sample.values) + nz.sample(spec_var, rng(_VAR))
        recs += [_provenance("mean", name, label, spec_mu), _provenance("variance", name, label, spec_var)]
        return mu, var, recs

    m = default_trim(config.mode, sample.n, config.trim)
    trim = TrimSpec(m)

    if config.mode == "dp_bunsteinke":
        kw = dict(mode=config.beta_mode, gamma=config.gamma, prune=config.prune)
        mu, spec, rep = _bunsteinke_release(sample, trim, eps_mu, rng(_MEAN), delta=d_mu, **kw)
        recs.append(_provenance("mean", name, label, spec, rep, m))
        first = budget.entry(f"numeric:{name}:first_moment")
        second = budget.entry(f"numeric:{name}:second_moment")
        ex, spec1, rep1 = _bunsteinke_release(sample, trim, float(first.epsilon), rng(_FIRST),
                                              delta=float(first.delta), **kw)
        lo2, hi2 = _second_moment_bounds(sample.lower, sample.upper)
        squares = BoundedSample(np.clip(sample.values ** 2, lo2, hi2), lo2, hi2)
        ex2, spec2, rep2 = _bunsteinke_release(squares, trim, float(second.epsilon), rng(_SECOND),
                                               delta=float(second.delta), **kw)
        recs.append(_provenance("first_moment", name, label, spec1, rep1, m))
        recs.append(_provenance("second_moment", name, label, spec2, rep2, m))
        return mu, ex2 - ex * ex, recs

    # dp_smooth
    beta_mu = _beta(eps_mu, config, d_mu)
    if m > 0:
        rep_mu = smooth_sensitivity_trimmed_mean(sample, trim, beta_mu, config.prune)
    else:
        rep_mu = smooth_sensitivity_mean(sample, beta_mu, config.prune)
    kept = trim_sample(sample, trim)
    spec_mu = _calibrate(rep_mu.smooth, eps_mu, config, d_mu, beta_mu)
    mu = kept.values.mean() + nz.sample(spec_mu, rng(_MEAN))

    var_entry = budget.entry(variance_label(name))
    eps_var, d_var = float(var_entry.epsilon), float(var_entry.delta)
    beta_var = _beta(eps_var, config, d_var)
    # Trimming moves at most one value in or out of the kept window per
    # replacement, so the variance bound of the kept sample stays beta-smooth.
    rep_var = smooth_sensitivity_variance(kept, beta_var, config.prune)
    spec_var = _calibrate(rep_var.smooth, eps_var, config, d_var, beta_var)
    var = population_variance(kept.values) + nz.sample(spec_var, rng(_VAR))
    recs += [_provenance("mean", name, label, spec_mu, rep_mu, m),
             _provenance("variance", name, label, spec_var, rep_var, m)]
    return mu, var, recs


# ---------------------------------------------------------------------------
# prediction


def truncated_normal_log_pdf(x, mu, sigma, a, b):
    """Log density of N(mu, sigma^2) restricted to [a, b].

    The normaliser ``Phi(beta) - Phi(alpha)`` is evaluated in log space on the
    side of the distribution where it does not cancel.
    """
    x, mu, sigma = np.asarray(x, float), np.asarray(mu, float), np.asarray(sigma, float)
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    z = (x - mu) / sigma
    upper_tail = alpha > 0
    hi = np.where(upper_tail, special.log_ndtr(-alpha), special.log_ndtr(beta))
    lo = np.where(upper_tail, special.log_ndtr(-beta), special.log_ndtr(alpha))
    log_norm = hi + np.log1p(-np.exp(lo - hi))
    out = -0.5 * z * z - 0.5 * math.log(2 * math.pi) - np.log(sigma) - log_norm
    return float(out) if out.ndim == 0 else out


def log_scores(model: NaiveBayesModel, columns: Sequence[np.ndarray]) -> np.ndarray:
    """(n, K) joint log scores for encoded feature columns."""
    schema = model.schema
    n = len(columns[0]) if columns else 0
    with np.errstate(divide="ignore"):
        scores = np.tile(np.log(model.priors), (n, 1))
    for attr, p, col in zip(schema.attributes, model.params, columns):
        if attr.is_numeric:
            col = np.asarray(col, float)
            bad = ~((col >= attr.lower) & (col <= attr.upper))
            if bad.any():
                r = int(np.argmax(bad))
                raise OutOfBounds(attr.name, r, float(col[r]), attr.lower, attr.upper)
            scores += truncated_normal_log_pdf(col[:, None], p.mu[None, :], p.sigma[None, :], p.lower, p.upper)
        else:
            scores += np.log(p.probs[:, np.asarray(col, dtype=np.intp)]).T
    return scores


def predict_codes(model: NaiveBayesModel, columns) -> tuple[np.ndarray, np.ndarray]:
    scores = log_scores(model, columns)
    return np.argmax(scores, axis=1), scores


def predict(model: NaiveBayesModel, instance) -> tuple[str, np.ndarray]:
    """Class label and per-class log scores for one raw feature vector."""
    from .core import validate_features

    cols = validate_features([list(instance)], model.schema)
    codes, scores = predict_codes(model, cols)
    return model.schema.class_labels[codes[0]], scores[0]


def accuracy(model: NaiveBayesModel, dataset: Dataset) -> float:
    codes, _ = predict_codes(model, dataset.columns)
    return float(np.mean(codes == dataset.labels))


def parameter_deviation(a: NaiveBayesModel, b: NaiveBayesModel) -> float:
    """Largest absolute difference between corresponding model parameters."""
    dev = float(np.max(np.abs(a.priors - b.priors)))
    for pa, pb in zip(a.params, b.params):
        if isinstance(pa, NumericParams):
            dev = max(dev, float(np.max(np.abs(pa.mu - pb.mu))), float(np.max(np.abs(pa.sigma - pb.sigma))))
        else:
            dev = max(dev, float(np.max(np.abs(pa.probs - pb.probs))))
    return dev


def same_parameters(a: NaiveBayesModel, b: NaiveBayesModel) -> bool:
    """Bitwise equality of every fitted parameter (metadata ignored)."""
    if not np.array_equal(a.priors, b.priors) or not np.array_equal(a.class_counts, b.class_counts):
        return False
    for pa, pb in zip(a.params, b.params):
        if type(pa) is not type(pb):
            return False
        arrays = ("mu", "sigma") if isinstance(pa, NumericParams) else ("counts", "probs")
        if not all(np.array_equal(getattr(pa, k), getattr(pb, k)) for k in arrays):
            return False
    return True


def with_priors(model: NaiveBayesModel, priors) -> NaiveBayesModel:
    return replace(model, priors=np.asarray(priors, float))
