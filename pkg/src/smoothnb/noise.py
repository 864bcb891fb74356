"""Noise families, inverse-CDF sampling and calibration to a sensitivity.

Every draw goes through the inverse CDF of one uniform variate taken from an
explicit ``numpy.random.Generator``, so a given seed produces the same draw
whatever the family and wherever the code runs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from scipy import special

from .exceptions import DeltaOutOfRange, GammaOutOfRange

Family = Literal["laplace", "cauchy", "gaussian"]
BetaMode = Literal["paper", "strict"]

_PAPER_CAUCHY_FACTOR = math.sqrt(2.0)


@dataclass(frozen=True)
class NoiseSpec:
    """A zero-centred noise distribution and how its scale was chosen.

    ``family="cauchy"`` with ``gamma != 2`` denotes the heavy-tailed density
    proportional to ``1 / (1 + |z|**gamma)``; ``gamma = 2`` is the ordinary
    Cauchy distribution.
    """

    family: str
    scale: float
    location: float = 0.0
    epsilon: float | None = None
    delta: float = 0.0
    gamma: float = 2.0
    beta: float | None = None
    sensitivity: float | None = None
    mode: str | None = None

    def __post_init__(self):
        if self.family not in ("laplace", "cauchy", "gaussian"):
            raise ValueError(f"unknown noise family {self.family!r}")
        if not self.scale >= 0 or not math.isfinite(self.scale):
            raise ValueError(f"noise scale must be finite and >= 0, got {self.scale}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(**d)


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for one leaf of a seed hierarchy.

    The stream depends only on ``(seed, keys)``, never on how many draws other
    leaves made, so work can be reordered or run in parallel.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)))


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform variates strictly inside (0, 1) on a 2**-53 lattice."""
    k = rng.integers(0, 2**53, size=size, dtype=np.int64)
    return (k + 0.5) / 2.0**53


def inverse_cdf(spec: NoiseSpec, u):
    u = np.asarray(u, dtype=float)
    if spec.family == "laplace":
        c = u - 0.5
        z = -np.sign(c) * np.log1p(-2.0 * np.abs(c))
    elif spec.family == "gaussian":
        z = special.ndtri(u)
    elif spec.gamma == 2.0:
        z = np.tan(np.pi * (u - 0.5))
    else:
        # |Z|**gamma / (1 + |Z|**gamma) ~ Beta(1/gamma, 1 - 1/gamma)
        g = spec.gamma
        t = special.betaincinv(1.0 / g, 1.0 - 1.0 / g, np.abs(2.0 * u - 1.0))
        z = np.sign(u - 0.5) * (t / (1.0 - t)) ** (1.0 / g)
    out = spec.location + spec.scale * z
    return float(out) if out.ndim == 0 else out


def sample(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw from ``spec``; zero scale returns the location exactly."""
    u = open_uniform(rng, size)
    if spec.scale == 0.0:
        return spec.location if size is None else np.full(size, spec.location)
    return inverse_cdf(spec, u)


# ---------------------------------------------------------------------------
# calibration


def _check_gamma(gamma):
    if not gamma > 1:
        raise GammaOutOfRange(f"gamma must exceed 1, got {gamma}")


def approx_constants(epsilon_access: float, delta: float) -> tuple[float, float]:
    """(scale multiplier, smoothing beta) for Gaussian noise under (eps, delta).

    The only place these constants live: scale ``c * S / eps`` with
    ``c = sqrt(2 ln(2/delta))`` and smoothing ``beta = eps / (2 ln(2/delta))``.
    """
    if not 0 < delta < 1:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    log_term = math.log(2.0 / delta)
    return math.sqrt(2.0 * log_term), epsilon_access / (2.0 * log_term)


def smoothing_beta(epsilon_access: float, mode: BetaMode = "strict", gamma: float = 2.0,
                   delta: float = 0.0) -> float:
    """The beta a smooth sensitivity must be computed with for this calibration."""
    if epsilon_access <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon_access}")
    if delta > 0:
        return approx_constants(epsilon_access, delta)[1]
    if mode == "paper":
        return epsilon_access
    if mode == "strict":
        _check_gamma(gamma)
        return epsilon_access / (2.0 * (gamma + 1.0))
    raise ValueError(f"unknown beta mode {mode!r}")


def calibrate_pure(sensitivity: float, epsilon_access: float, gamma: float = 2.0,
                   mode: BetaMode = "strict", beta: float | None = None) -> NoiseSpec:
    """Heavy-tailed noise for a beta-smooth sensitivity under pure DP.

    ``strict``: scale ``2 (gamma + 1) S / eps``, valid when ``S`` was computed
    with ``beta <= eps / (2 (gamma + 1))``. ``paper``: standard Cauchy with
    scale ``sqrt(2) S / eps``.
    """
    _check_gamma(gamma)
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    if epsilon_access <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon_access}")
    if mode == "paper":
        scale = _PAPER_CAUCHY_FACTOR * sensitivity / epsilon_access
        gamma = 2.0
    elif mode == "strict":
        limit = epsilon_access / (2.0 * (gamma + 1.0))
        if beta is not None and beta > limit * (1 + 1e-12):
            raise ValueError(f"beta={beta} exceeds eps/(2(gamma+1))={limit}; the noise would not be private")
        scale = 2.0 * (gamma + 1.0) * sensitivity / epsilon_access
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return NoiseSpec("cauchy", scale, epsilon=epsilon_access, gamma=gamma,
                     beta=beta if beta is not None else smoothing_beta(epsilon_access, mode, gamma),
                     sensitivity=sensitivity, mode=mode)


def calibrate_approx(sensitivity: float, epsilon_access: float, delta: float) -> NoiseSpec:
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    if epsilon_access <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon_access}")
    c, beta = approx_constants(epsilon_access, delta)
    return NoiseSpec("gaussian", c * sensitivity / epsilon_access, epsilon=epsilon_access,
                     delta=delta, beta=beta, sensitivity=sensitivity, mode="approx")


def calibrate_global_laplace(sensitivity: float, epsilon_access: float) -> NoiseSpec:
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    if epsilon_access <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon_access}")
    return NoiseSpec("laplace", sensitivity / epsilon_access, epsilon=epsilon_access,
                     sensitivity=sensitivity, mode="global")


def count_cauchy(epsilon_access: float) -> NoiseSpec:
    """Cauchy noise for a sensitivity-1 count at scale ``sqrt(2) / eps``.

    The density ratio of Cauchy(0, b) under a unit shift is at most
    ``1 + (1 + sqrt(1 + 4 b**2)) / (2 b**2)``; at ``b = sqrt(2)/eps`` its log
    stays below ``eps`` for every ``eps > 0``.
    """
    if epsilon_access <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon_access}")
    return NoiseSpec("cauchy", _PAPER_CAUCHY_FACTOR / epsilon_access, epsilon=epsilon_access,
                     sensitivity=1.0, mode="count")


def cauchy_shift_log_ratio(shift: float, scale: float) -> float:
    """``sup_z log(f(z) / f(z + shift))`` for Cauchy(0, scale)."""
    r = shift / scale
    return math.log1p(0.5 * r * r + 0.5 * r * math.sqrt(r * r + 4.0))
