"""Local, at-distance, global and smooth sensitivity of bounded-sample statistics.

All statistics are functions of an unordered sample of ``n`` reals lying in a
public interval ``[L, U]``. Two samples are neighbours when they differ by the
replacement of one element (``n`` is fixed). For a statistic ``f``:

* ``LS(x)``: largest change in ``f`` from replacing one element of ``x``.
* ``A(k)(x)``: largest ``LS(y)`` over samples ``y`` within ``k`` replacements.
* ``S*(x) = max_k exp(-beta k) A(k)(x)``: the beta-smooth sensitivity.

The variance used throughout is the population variance (divide by ``n``).

The at-distance tables are exact over the continuous domain ``[L, U]^n``; the
searches below enumerate the only configurations that can be optimal (which
elements to replace, and with which extreme) rather than all datasets.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Literal

import numba
import numpy as np

from .exceptions import BadK, SampleTooSmall, TrimTooLarge

Statistic = Literal["mean", "variance", "trimmed_mean"]


@dataclass(frozen=True)
class BoundedSample:
    """A sorted sample with public bounds ``lower <= values[i] <= upper``."""

    values: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise SampleTooSmall("a bounded sample needs at least one value")
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"invalid bounds [{lo}, {hi}]")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample contains non-finite values")
        v.sort()
        if v[0] < lo or v[-1] > hi:
            raise ValueError(f"sample values outside [{lo}, {hi}]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class TrimSpec:
    """Number of values dropped from each end of the sorted sample."""

    m: int = 0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise TrimTooLarge(f"trim count must be a non-negative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))


@dataclass(frozen=True)
class SensitivityReport:
    statistic: str
    local: float
    at_distance: np.ndarray = field(repr=False)
    smooth: float
    beta: float
    k_max: int

    def to_dict(self, max_rows: int | None = None) -> dict:
        table = self.at_distance if max_rows is None else self.at_distance[:max_rows]
        return {
            "statistic": self.statistic,
            "local": self.local,
            "smooth": self.smooth,
            "beta": self.beta,
            "k_max": self.k_max,
            "at_distance": [float(a) for a in table],
        }


def trim_sample(sample: BoundedSample, trim: TrimSpec) -> BoundedSample:
    """Drop the ``m`` smallest and ``m`` largest values."""
    m = trim.m
    if sample.n - 2 * m < 1:
        raise TrimTooLarge(f"cannot trim {m} from each side of {sample.n} values")
    if m == 0:
        return sample
    return BoundedSample(sample.values[m : sample.n - m], sample.lower, sample.upper)


# ---------------------------------------------------------------------------
# mean


def local_sensitivity_mean(sample: BoundedSample) -> float:
    x, n = sample.values, sample.n
    return max(sample.upper - x[0], x[-1] - sample.lower) / n


def mean_at_distance(sample: BoundedSample, k_max: int | None = None) -> np.ndarray:
    """``A(k)`` for the mean, ``k = 0..k_max`` (default ``n``).

    Replacing the k smallest values with ``U`` (or the k largest with ``L``)
    moves the sample extremes as far apart as possible; the local sensitivity
    of the result is then one further move of an extreme element. From
    ``k = 1`` on, one replaced element already sits on the opposite bound, so
    the table saturates at ``(U - L) / n``.
    """
    n, lo, hi = sample.n, sample.lower, sample.upper
    k_max = n if k_max is None else k_max
    out = np.empty(k_max + 1)
    x = sample.values
    for k in range(k_max + 1):
        # k smallest -> U and k largest -> L give the same extremes once k >= 1
        smallest = lo if k >= 1 else x[0]
        largest = hi if k >= 1 else x[-1]
        out[k] = max(hi - smallest, largest - lo) / n
    return out


# ---------------------------------------------------------------------------
# variance


@numba.njit(cache=True, nogil=True)
def _variance_free_slot(prefix, n, k, lo, hi):
    # The moved element is itself one of the k replaced slots: park it at the
    # mean of the others and send the other k-1 replacements to one bound.
    total = prefix[n]
    m_low = (prefix[n - k] + (k - 1) * lo) / (n - 1)
    m_high = (total - prefix[k] + (k - 1) * hi) / (n - 1)
    a = hi - m_low
    b = m_high - lo
    return max(a * a, b * b)


@numba.njit(cache=True, nogil=True)
def _variance_at_distance_kernel(x, lo, hi, beta, prune):
    n = x.size
    prefix = np.zeros(n + 1)
    for j in range(n):
        prefix[j + 1] = prefix[j] + x[j]
    total = prefix[n]
    scale = (n - 1) / (n * n)
    gs = scale * (hi - lo) * (hi - lo)
    out = np.zeros(n + 1)
    running = 0.0
    smooth = 0.0
    k_last = n
    for k in range(n + 1):
        best = 0.0
        if k >= 1:
            best = _variance_free_slot(prefix, n, k, lo, hi)
        if k <= n - 1:
            for i in range(n):
                xi = x[i]
                others = total - xi
                # k largest of the others -> L
                if i < n - k:
                    top = total - prefix[n - k]
                else:
                    top = total - prefix[n - k - 1] - xi
                m_low = (others - top + k * lo) / (n - 1)
                # k smallest of the others -> U
                if i >= k:
                    bottom = prefix[k]
                else:
                    bottom = prefix[k + 1] - xi
                m_high = (others - bottom + k * hi) / (n - 1)
                d_low = xi - m_low
                d_high = xi - m_high
                up = (hi - m_low) * (hi - m_low) - d_low * d_low
                down = (lo - m_high) * (lo - m_high) - d_high * d_high
                shrink = max(d_low * d_low, d_high * d_high)
                v = max(up, max(down, shrink))
                if v > best:
                    best = v
        val = scale * best
        if val > running:
            running = val
        out[k] = running
        cand = math.exp(-beta * k) * running
        if cand > smooth:
            smooth = cand
        if prune and math.exp(-beta * (k + 1)) * gs <= smooth:
            k_last = k
            break
    return out[: k_last + 1]


def _variance_table(sample: BoundedSample, beta: float = 0.0, prune: bool = False) -> np.ndarray:
    if sample.n < 2:
        raise SampleTooSmall("variance sensitivity needs n >= 2")
    return _variance_at_distance_kernel(
        np.ascontiguousarray(sample.values), sample.lower, sample.upper, float(beta), bool(prune)
    )


def variance_at_distance(sample: BoundedSample) -> np.ndarray:
    """``A(k)`` for the population variance, ``k = 0..n``.

    With ``O`` the other ``n - 1`` values (mean ``mu``), moving one element
    ``v`` to ``z`` changes ``n * Var`` by a convex quadratic in ``z`` with its
    vertex at ``mu``; the largest change is therefore either growth (``z`` at a
    bound) or shrinkage (``z = mu``), and both are monotone in ``mu``. So the
    ``k`` replacements always go to one bound and always hit a contiguous block
    of the sorted sample (the k-maximal / k-minimal subset structure): either
    the moved element is one of the replacements, or it is an original ``x_i``
    and the replacements push ``mu`` away from it. ``O(n^2)`` overall.
    """
    return _variance_table(sample)


def local_sensitivity_variance(sample: BoundedSample) -> float:
    if sample.n < 2:
        raise SampleTooSmall("variance sensitivity needs n >= 2")
    x = np.ascontiguousarray(sample.values)
    return float(_variance_at_distance_kernel(x, sample.lower, sample.upper, sys.float_info.max, True)[0])


def population_variance(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.mean((v - v.mean()) ** 2))


def k_max_variance_subset(sample: BoundedSample, k: int) -> tuple[np.ndarray, float]:
    """Size-``k`` subset of largest population variance.

    The optimum takes ``i`` values from the front of the sorted sample and
    ``k - i`` from the back; ties go to the smallest ``i``.
    """
    n = sample.n
    if not 1 <= k < n:
        raise BadK(f"k must lie in [1, {n - 1}], got {k}")
    x = sample.values
    best_idx, best_var = None, -1.0
    for i in range(k + 1):
        idx = np.r_[np.arange(i), np.arange(n - (k - i), n)]
        v = population_variance(x[idx])
        if v > best_var:
            best_idx, best_var = idx, v
    return best_idx, best_var


def k_min_variance_subset(sample: BoundedSample, k: int) -> tuple[np.ndarray, float]:
    """Size-``k`` subset of smallest population variance: a contiguous window."""
    n = sample.n
    if not 1 <= k < n:
        raise BadK(f"k must lie in [1, {n - 1}], got {k}")
    x = sample.values
    best_idx, best_var = None, math.inf
    for i in range(n - k + 1):
        v = population_variance(x[i : i + k])
        if v < best_var:
            best_idx, best_var = np.arange(i, i + k), v
    return best_idx, best_var


# ---------------------------------------------------------------------------
# trimmed mean


def _extended(x: np.ndarray, idx: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # sorted sample padded with L below index 0 and U from index n upward
    n = x.size
    return np.where(idx < 0, lo, np.where(idx >= n, hi, x[np.clip(idx, 0, n - 1)]))


def trimmed_mean_at_distance(sample: BoundedSample, trim: TrimSpec, k_max: int | None = None) -> np.ndarray:
    """``A(k)`` for the mean of the middle ``n - 2m`` sorted values.

    One replacement shifts the surviving window by at most one position, so
    ``LS = max(x[n-m] - x[m], x[n-m-1] - x[m-1]) / (n - 2m)`` on the sorted
    sample padded with ``L`` on the left and ``U`` on the right. Within ``k``
    replacements the best move sends ``t`` values to ``L`` and ``k - t`` to
    ``U`` (taken from the middle), which shifts those indices by ``t``.
    Only ``t <= m + 1`` can matter; beyond that the lower index is already
    padding.
    """
    n, m = sample.n, trim.m
    if n - 2 * m < 1:
        raise TrimTooLarge(f"cannot trim {m} from each side of {n} values")
    k_max = n if k_max is None else k_max
    x, lo, hi = sample.values, sample.lower, sample.upper
    k = np.arange(k_max + 1)[:, None]
    t = np.arange(m + 2)[None, :]
    valid = t <= k
    grow = _extended(x, n - m + k - t, lo, hi) - _extended(x, m - t + 0 * k, lo, hi)
    shrink = _extended(x, n - m - 1 + k - t, lo, hi) - _extended(x, m - 1 - t + 0 * k, lo, hi)
    gap = np.where(valid, np.maximum(grow, shrink), -np.inf).max(axis=1)
    return np.maximum.accumulate(gap / (n - 2 * m))


def trimmed_mean(sample: BoundedSample, trim: TrimSpec) -> float:
    return float(trim_sample(sample, trim).values.mean())


# ---------------------------------------------------------------------------
# smooth sensitivity


def smooth_from_table(at_distance: np.ndarray, beta: float) -> float:
    k = np.arange(len(at_distance))
    return float(np.max(np.exp(-beta * k) * at_distance))


def _check_beta(beta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def _prune_table(table: np.ndarray, beta: float, gs: float) -> np.ndarray:
    # A(k) <= GS, so once exp(-beta k) GS drops below the running maximum the
    # remaining terms cannot win.
    if not math.isfinite(beta):
        return table[:1]
    running = 0.0
    for k, a in enumerate(table):
        running = max(running, math.exp(-beta * k) * a)
        if math.exp(-beta * (k + 1)) * gs <= running:
            return table[: k + 1]
    return table


def _report(statistic, table, beta) -> SensitivityReport:
    table = np.asarray(table, dtype=float)
    table.setflags(write=False)
    return SensitivityReport(
        statistic=statistic,
        local=float(table[0]),
        at_distance=table,
        smooth=smooth_from_table(table, beta),
        beta=float(beta),
        k_max=len(table) - 1,
    )


def smooth_sensitivity_mean(sample: BoundedSample, beta: float, prune: bool = False) -> SensitivityReport:
    _check_beta(beta)
    table = mean_at_distance(sample)
    if prune:
        table = _prune_table(table, beta, global_sensitivity("mean", (sample.lower, sample.upper), sample.n))
    return _report("mean", table, beta)


def smooth_sensitivity_variance(sample: BoundedSample, beta: float, prune: bool = False) -> SensitivityReport:
    """beta-smooth sensitivity of the population variance.

    The full table ``A(0..n)`` costs ``O(n^2)``. ``prune=True`` stops as soon
    as no larger distance can raise the maximum, which is exact but leaves
    ``at_distance`` shorter than ``n + 1``.
    """
    _check_beta(beta)
    return _report("variance", _variance_table(sample, beta, prune), beta)


def smooth_sensitivity_trimmed_mean(
    sample: BoundedSample, trim: TrimSpec, beta: float, prune: bool = False
) -> SensitivityReport:
    _check_beta(beta)
    if sample.n - 2 * trim.m < 2 and trim.m > 0:
        raise TrimTooLarge(f"trimming {trim.m} from each side of {sample.n} values leaves fewer than 2")
    if trim.m == 0:
        report = smooth_sensitivity_mean(sample, beta, prune)
        return SensitivityReport("trimmed_mean", report.local, report.at_distance, report.smooth, report.beta, report.k_max)
    table = trimmed_mean_at_distance(sample, trim)
    if prune:
        table = _prune_table(table, beta, (sample.upper - sample.lower) / (sample.n - 2 * trim.m))
    return _report("trimmed_mean", table, beta)


def global_sensitivity(statistic: str, bounds, n: int) -> float:
    """Worst-case one-replacement change over all samples of size ``n``."""
    lo, hi = map(float, bounds)
    if statistic == "mean":
        return (hi - lo) / n
    if statistic == "variance":
        if n < 2:
            raise SampleTooSmall("variance sensitivity needs n >= 2")
        # A(n): every slot is free, so this is the free-slot case with k = n
        # with k = n no original survives, so the prefix sums are never read
        return (n - 1) / (n * n) * float(_variance_free_slot(np.zeros(n + 1), n, n, lo, hi))
    if statistic == "trimmed_mean":
        raise ValueError("global sensitivity of the trimmed mean depends on the trim; use trimmed_mean_at_distance")
    raise ValueError(f"unknown statistic {statistic!r}")


def sensitivity_report(statistic: str, sample: BoundedSample, beta: float, trim: TrimSpec | None = None,
                       prune: bool = False) -> SensitivityReport:
    if statistic == "mean":
        return smooth_sensitivity_mean(sample, beta, prune)
    if statistic == "variance":
        return smooth_sensitivity_variance(sample, beta, prune)
    if statistic == "trimmed_mean":
        return smooth_sensitivity_trimmed_mean(sample, trim or TrimSpec(1), beta, prune)
    raise ValueError(f"unknown statistic {statistic!r}")
