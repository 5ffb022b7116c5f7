import math
import statistics

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from slicegrad.errors import DomainError, NumericalError
from slicegrad.specfn import (
    Branch,
    lambert_w,
    log_beta,
    log_gamma,
    normal_hazard,
    sample_truncated_normal,
    std_normal_cdf,
    std_normal_inv_cdf,
    std_normal_pdf,
    std_normal_sf,
)


@pytest.mark.parametrize("x", [-8.0, -3.3, -1.0, 0.0, 0.4, 2.0, 6.5])
def test_cdf_matches_erfc(x):
    assert std_normal_cdf(x) == pytest.approx(0.5 * math.erfc(-x / math.sqrt(2)), rel=1e-14)
    assert std_normal_sf(x) == pytest.approx(0.5 * math.erfc(x / math.sqrt(2)), rel=1e-14)


def test_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-15)
    assert std_normal_cdf(-40.0) == 0.0
    assert std_normal_cdf(40.0) == 1.0


def test_pdf():
    assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(std_normal_pdf(x), stats.norm.pdf(x), rtol=1e-14)


@pytest.mark.parametrize("p", [1e-300, 1e-12, 0.001, 0.025, 0.5, 0.8, 0.999999])
def test_inv_cdf_matches_stdlib(p):
    ref = statistics.NormalDist().inv_cdf(p)
    assert std_normal_inv_cdf(p) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_inv_cdf_known():
    assert std_normal_inv_cdf(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    assert std_normal_inv_cdf(0.5) == 0.0


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_inv_cdf_domain(p):
    with pytest.raises(DomainError):
        std_normal_inv_cdf(p)


@given(st.floats(min_value=1e-10, max_value=1 - 1e-10))
def test_inv_cdf_round_trip(p):
    assert std_normal_cdf(std_normal_inv_cdf(p)) == pytest.approx(p, rel=1e-9)


@pytest.mark.parametrize("c", [0.0, 0.5, 3.0, 10.0, 30.0])
def test_hazard_vs_mpmath(c):
    mpmath.mp.dps = 40
    ref = mpmath.npdf(c) / (mpmath.erfc(c / mpmath.sqrt(2)) / 2)
    assert normal_hazard(c) == pytest.approx(float(ref), rel=1e-13)


def test_log_gamma_beta():
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-15)
    assert log_gamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-15)
    assert log_beta(2.0, 3.0) == pytest.approx(math.log(1 / 12), rel=1e-14)
    a = 1.3
    assert log_beta(a, a) == pytest.approx(2 * math.lgamma(a) - math.lgamma(2 * a), rel=1e-14)
    with pytest.raises(DomainError):
        log_gamma(0.0)
    with pytest.raises(DomainError):
        log_beta(-1.0, 2.0)


# Lambert W


def test_lambert_w_known_values():
    assert lambert_w(Branch.Principal, 0.0) == 0.0
    assert lambert_w(Branch.Principal, math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w(Branch.Principal, -1 / math.e) == -1.0
    assert lambert_w(Branch.NegOne, -1 / math.e) == -1.0
    assert lambert_w(Branch.NegOne, -2 * math.exp(-2)) == pytest.approx(-2.0, rel=1e-14)
    assert lambert_w(Branch.Principal, 1.0) == pytest.approx(0.5671432904097838, rel=1e-15)


def test_lambert_w_scalar_and_array():
    assert isinstance(lambert_w(Branch.Principal, 1.0), float)
    out = lambert_w(Branch.Principal, np.array([0.0, 1.0, 10.0]))
    assert out.shape == (3,)


@pytest.mark.parametrize("branch,x", [
    (Branch.Principal, -0.4),
    (Branch.NegOne, -0.4),
    (Branch.NegOne, 0.0),
    (Branch.NegOne, 1.0),
    (Branch.Principal, float("nan")),
])
def test_lambert_w_domain(branch, x):
    with pytest.raises(DomainError):
        lambert_w(branch, x)


def test_lambert_w_iteration_budget():
    with pytest.raises(NumericalError):
        lambert_w(Branch.Principal, 1e300, max_iter=0)


def test_lambert_w_against_mpmath():
    mpmath.mp.dps = 30
    xs0 = np.concatenate([-np.logspace(-20, math.log10(0.3678794), 60), np.logspace(-20, 300, 60)])
    xs1 = -np.logspace(-300, math.log10(0.3678794), 80)
    for branch, xs, k in ((Branch.Principal, xs0, 0), (Branch.NegOne, xs1, -1)):
        w = lambert_w(branch, xs)
        ref = np.array([float(mpmath.lambertw(mpmath.mpf(float(x)), k).real) for x in xs])
        np.testing.assert_allclose(w, ref, rtol=4e-15, atol=1e-300)


def test_lambert_w_near_branch_point():
    # just above -1/e the result depends on x + 1/e, which has to be formed carefully
    mpmath.mp.dps = 40
    for d in (1e-15, 1e-12, 1e-9):
        x = -1 / math.e + d
        ref = float(mpmath.lambertw(mpmath.mpf(x), 0).real)
        assert lambert_w(Branch.Principal, x) == pytest.approx(ref, rel=1e-12)
        ref1 = float(mpmath.lambertw(mpmath.mpf(x), -1).real)
        assert lambert_w(Branch.NegOne, x) == pytest.approx(ref1, rel=1e-12)


@settings(max_examples=300)
@given(st.floats(min_value=-1 / math.e + 1e-6, max_value=1e100))
def test_lambert_w_inverse_property(x):
    w = lambert_w(Branch.Principal, x)
    assert w >= -1.0
    assert w * math.exp(w) == pytest.approx(x, rel=1e-12, abs=1e-300)


@settings(max_examples=300)
@given(st.floats(min_value=-1 / math.e + 1e-6, max_value=-1e-300))
def test_lambert_w_lower_branch_inverse_property(x):
    w = lambert_w(Branch.NegOne, x)
    assert w <= -1.0
    assert w * math.exp(w) == pytest.approx(x, rel=1e-11, abs=1e-300)


def test_lambert_w_agrees_with_scipy_away_from_branch_point():
    xs = np.linspace(-0.3, 50, 400)
    np.testing.assert_allclose(lambert_w(Branch.Principal, xs), special.lambertw(xs, 0).real,
                               rtol=1e-13)


# truncated normal


def test_truncated_normal_endpoints():
    assert sample_truncated_normal(0.0, 0.5) == pytest.approx(0.5)
    assert sample_truncated_normal(0.0, -1.0, 2.0) == pytest.approx(-1.0)
    assert sample_truncated_normal(1.0, -1.0, 2.0) == pytest.approx(2.0)
    assert 0.5 <= sample_truncated_normal(0.999, 0.5) < math.inf


def test_truncated_normal_vs_scipy_quantiles():
    u = np.linspace(0.001, 0.999, 101)
    for a, b in ((0.0, math.inf), (0.5, math.inf), (2.0, 3.0), (-1.0, 0.3), (-4.0, -2.0)):
        np.testing.assert_allclose(sample_truncated_normal(u, a, b), stats.truncnorm.ppf(u, a, b),
                                   rtol=1e-9, atol=1e-12)


def test_truncated_normal_far_tail_precision():
    # mean of N(0,1) truncated to [c, inf) is the hazard h(c)
    c = 8.0
    u = (np.arange(200000) + 0.5) / 200000
    x = sample_truncated_normal(u, c)
    assert x.mean() == pytest.approx(normal_hazard(c), rel=1e-4)
    assert np.all(x >= c)


def test_truncated_normal_errors():
    with pytest.raises(DomainError):
        sample_truncated_normal(0.5, 1.0, 1.0)
    with pytest.raises(NumericalError):
        sample_truncated_normal(0.5, 50.0, 60.0)
