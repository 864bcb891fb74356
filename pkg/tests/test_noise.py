import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smoothnb import noise as nz
from smoothnb.exceptions import DeltaOutOfRange, GammaOutOfRange


def test_inverse_cdf_examples():
    assert nz.inverse_cdf(nz.NoiseSpec("laplace", 1.0), 0.5) == 0.0
    assert nz.inverse_cdf(nz.NoiseSpec("cauchy", 1.0), 0.75) == pytest.approx(1.0, abs=1e-15)
    assert nz.inverse_cdf(nz.NoiseSpec("gaussian", 1.0), 0.975) == pytest.approx(1.959963984540054)


def test_generalized_family_cdf():
    # density proportional to 1/(1+|z|^g): check the inverse CDF against quadrature
    from scipy import integrate

    g = 3.0
    dens = lambda z: 1.0 / (1.0 + abs(z) ** g)  # noqa: E731
    norm = 2 * integrate.quad(dens, 0, np.inf)[0]
    spec = nz.NoiseSpec("cauchy", 1.0, gamma=g)
    for u in (0.1, 0.3, 0.5, 0.8, 0.99):
        z = nz.inverse_cdf(spec, u)
        cdf = 0.5 + math.copysign(integrate.quad(dens, 0, abs(z))[0], z) / norm
        assert cdf == pytest.approx(u, abs=1e-8)


def test_determinism_and_zero_scale():
    spec = nz.NoiseSpec("cauchy", 2.0)
    a = nz.sample(spec, nz.child_rng(9, 1, 2))
    b = nz.sample(spec, nz.child_rng(9, 1, 2))
    assert a == b
    assert nz.sample(spec, nz.child_rng(9, 1, 3)) != a
    assert nz.sample(nz.NoiseSpec("laplace", 0.0), nz.child_rng(1)) == 0.0


def test_same_uniform_across_families():
    u = nz.open_uniform(nz.child_rng(4, 0))
    for fam in ("laplace", "cauchy", "gaussian"):
        spec = nz.NoiseSpec(fam, 1.0)
        assert nz.sample(spec, nz.child_rng(4, 0)) == nz.inverse_cdf(spec, u)


def test_open_uniform_in_open_interval():
    u = nz.open_uniform(nz.child_rng(0), 10000)
    assert u.min() > 0 and u.max() < 1


def test_laplace_moments():
    lam = 1.7
    x = nz.sample(nz.NoiseSpec("laplace", lam), nz.child_rng(123), size=1_000_000)
    sd = math.sqrt(2) * lam
    assert abs(x.mean()) < 5 * sd / 1000
    assert x.std() == pytest.approx(sd, rel=0.02)


def test_cauchy_iqr():
    lam = 0.8
    x = nz.sample(nz.NoiseSpec("cauchy", lam), nz.child_rng(321), size=1_000_000)
    q1, q3 = np.percentile(x, [25, 75])
    assert q3 - q1 == pytest.approx(2 * lam, rel=0.02)


def test_pure_calibration_examples():
    assert nz.calibrate_pure(0.5, 0.25, mode="paper").scale == pytest.approx(2 * math.sqrt(2))
    strict = nz.calibrate_pure(0.5, 0.25, 2.0, mode="strict")
    assert strict.scale == pytest.approx(12.0)
    assert strict.beta == pytest.approx(0.25 / 6)
    assert nz.calibrate_pure(0.0, 0.25).scale == 0.0


def test_strict_rejects_large_beta():
    with pytest.raises(ValueError):
        nz.calibrate_pure(1.0, 0.6, 2.0, "strict", beta=0.2)


@pytest.mark.parametrize("gamma", [1.0, 0.5, -2])
def test_gamma_range(gamma):
    with pytest.raises(GammaOutOfRange):
        nz.calibrate_pure(1.0, 1.0, gamma)


def test_approx_calibration():
    c, beta = nz.approx_constants(0.3, 1 / 1000)
    assert beta == pytest.approx(0.3 / (2 * math.log(2000)))
    spec = nz.calibrate_approx(2.0, 0.3, 1e-3)
    assert spec.family == "gaussian"
    assert spec.scale == pytest.approx(math.sqrt(2 * math.log(2000)) * 2.0 / 0.3)
    assert nz.calibrate_approx(0.0, 0.3, 1e-3).scale == 0.0
    scales = [nz.calibrate_approx(1.0, 1.0, d).scale for d in (1e-2, 1e-6, 1e-12, 1e-100)]
    assert scales == sorted(scales)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(DeltaOutOfRange):
            nz.calibrate_approx(1.0, 1.0, bad)


def test_global_laplace():
    assert nz.calibrate_global_laplace(1.0, 0.5).scale == 2.0
    assert nz.calibrate_global_laplace(1.0, 1.0).scale == 1.0
    assert nz.calibrate_global_laplace(0.0, 1.0).scale == 0.0


CALIBRATIONS = [
    lambda S, e: nz.calibrate_pure(S, e),
    lambda S, e: nz.calibrate_pure(S, e, mode="paper"),
    lambda S, e: nz.calibrate_approx(S, e, 1e-5),
    nz.calibrate_global_laplace,
]


@pytest.mark.parametrize("cal", CALIBRATIONS)
@given(s=st.floats(1e-3, 10), eps=st.floats(1e-3, 10), f=st.floats(1.01, 1.5))
def test_calibration_monotone(cal, s, eps, f):
    base = cal(s, eps).scale
    assert cal(s * f, eps).scale > base > cal(s, eps * f).scale


@given(st.floats(1e-3, 50))
def test_count_cauchy_is_private(eps):
    spec = nz.count_cauchy(eps)
    assert nz.cauchy_shift_log_ratio(1.0, spec.scale) <= eps * (1 + 1e-12)


def test_cauchy_ratio_formula_matches_grid():
    b = 0.7
    z = np.linspace(-20, 20, 400001)
    f = lambda t: 1 / (1 + (t / b) ** 2)  # noqa: E731
    assert np.max(np.log(f(z) / f(z + 1.0))) == pytest.approx(nz.cauchy_shift_log_ratio(1.0, b), rel=1e-6)


def test_spec_round_trip():
    spec = nz.calibrate_pure(0.3, 0.2)
    assert nz.NoiseSpec.from_dict(spec.to_dict()) == spec
