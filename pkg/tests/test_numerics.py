import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from harmonic_visibility import numerics
from harmonic_visibility.errors import InputError, NoSignChangeError, QuadratureError


# --- integrate -------------------------------------------------------------


def test_integrate_hyperbolic_laplace_transform():
    val = numerics.integrate(lambda r: math.exp(-2 * r) * 2 * math.pi * math.sinh(r), (0, math.inf), decay_rate=1.0)
    assert val == pytest.approx(2 * math.pi / 3, rel=1e-9)


def test_integrate_constant():
    assert numerics.integrate(lambda r: 1.0, (0, 1)) == pytest.approx(1.0, rel=1e-12)


def test_integrate_periodic_profile():
    val = numerics.integrate(lambda s: 1 + 0.5 * math.sin(s), (0, 2 * math.pi))
    assert val == pytest.approx(2 * math.pi, rel=1e-10)


def test_integrate_empty_interval():
    assert numerics.integrate(math.exp, (1.0, 1.0)) == 0.0


def test_integrate_rejects_bad_inputs():
    with pytest.raises(InputError):
        numerics.integrate(math.exp, (1.0, 0.0))
    with pytest.raises(InputError):
        numerics.integrate(math.exp, (0.0, 1.0), rel_tol=0.5)
    with pytest.raises(InputError):
        numerics.integrate(lambda r: math.exp(-r), (0.0, math.inf))


def test_integrate_failure_carries_estimate():
    # an integrable singularity that QUADPACK cannot resolve to 1e-12
    with pytest.raises(QuadratureError) as info:
        numerics.integrate(lambda x: math.sin(1.0 / x) / x if x else 0.0, (0.0, 1.0), rel_tol=1e-12)
    assert math.isfinite(info.value.estimate)
    assert info.value.error_bound >= 0


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("extra", [0.3, 1.0, 2.5])
def test_integrate_matches_trapezoid_oracle(k, extra):
    b = k + extra

    def f(r):
        return math.exp(-b * r) * math.sinh(r) ** k

    # truncate where the integrand drops below 1e-16 (bound sinh^k r <= e^{kr}/2^k)
    r_end = (16 * math.log(10)) / (b - k)
    grid = np.linspace(0.0, r_end, 2_000_001)
    vals = np.exp(-b * grid) * np.sinh(grid) ** k
    oracle = np.trapezoid(vals, grid) if hasattr(np, "trapezoid") else np.trapz(vals, grid)
    got = numerics.integrate(f, (0, math.inf), decay_rate=b - k)
    assert got == pytest.approx(oracle, rel=1e-8)


poly = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6)


@settings(max_examples=40, deadline=None)
@given(poly, poly, st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_is_linear(c1, c2, alpha, beta):
    f = np.polynomial.Polynomial(c1)
    g = np.polynomial.Polynomial(c2)
    dom = (-1.0, 2.0)
    try:
        lhs = numerics.integrate(lambda x: alpha * f(x) + beta * g(x), dom)
        i_f = numerics.integrate(f, dom)
        i_g = numerics.integrate(g, dom)
    except QuadratureError:
        # near-cancelling integrals have no meaningful relative target
        return
    scale = abs(alpha * i_f) + abs(beta * i_g) + abs(lhs)
    assert abs(lhs - alpha * i_f - beta * i_g) <= 1e-8 * scale + 1e-12


# --- find_root -------------------------------------------------------------


def test_find_root_linear():
    assert numerics.find_root(lambda t: t - 1, (0, 2), abs_tol=1e-12) == pytest.approx(1.0, abs=1e-12)


def test_find_root_cosh():
    assert numerics.find_root(lambda t: math.cosh(t) - math.cosh(0.5), (0, 1)) == pytest.approx(0.5, abs=1e-12)


def test_find_root_hyperbolic_hit():
    f = lambda t: math.cosh(2) * math.cosh(t) - math.sinh(2) * math.sinh(t) - math.cosh(0.5)
    assert numerics.find_root(f, (0, 2)) == pytest.approx(1.5, abs=1e-11)


def test_find_root_requires_sign_change():
    with pytest.raises(NoSignChangeError):
        numerics.find_root(lambda t: t * t + 1, (-1, 1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_find_root_residual_bound(slope, root):
    f = lambda x: slope * (x - root) + 0.1 * math.tanh(x - root)
    x = numerics.find_root(f, (root - 4, root + 7), abs_tol=1e-12)
    fprime = slope + 0.1
    assert abs(f(x)) <= fprime * 1e-12 + 1e-14


# --- random streams and Poisson counts -------------------------------------


def test_poisson_zero_mean():
    gen = numerics.RngStream(1).generator()
    assert np.all(numerics.sample_poisson_count(0.0, gen, size=1000) == 0)


def test_poisson_moments():
    draws = numerics.sample_poisson_count(4.0, numerics.RngStream(2024, 3), size=10**6)
    assert abs(draws.mean() - 4.0) <= 0.01
    assert abs(draws.var() - 4.0) <= 0.03


@pytest.mark.parametrize("mean", [-1.0, math.inf, math.nan])
def test_poisson_rejects_bad_mean(mean):
    with pytest.raises(InputError):
        numerics.sample_poisson_count(mean, numerics.RngStream(0))


def test_stream_value_semantics():
    a = numerics.RngStream(5, 9).generator().random(16)
    b = numerics.RngStream(5, 9).generator().random(16)
    c = numerics.RngStream(5, 10).generator().random(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_rejects_out_of_range():
    with pytest.raises(InputError):
        numerics.RngStream(-1)
    with pytest.raises(InputError):
        numerics.RngStream(0, 2**64)


def test_stream_determinism_across_processes():
    code = (
        "from harmonic_visibility.numerics import RngStream;"
        "print(RngStream(123456789, 42).generator().random(8).tobytes().hex())"
    )
    runs = [subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout for _ in range(2)]
    assert runs[0] == runs[1]
    assert runs[0].strip() == numerics.RngStream(123456789, 42).generator().random(8).tobytes().hex()


# --- inverse-CDF sampling --------------------------------------------------


def test_inverse_cdf_linear_density():
    assert numerics.sample_inverse_cdf(lambda r: 2 * r, (0, 1), 0.25) == pytest.approx(0.5, abs=1e-9)


def test_inverse_cdf_sinh_density():
    expected = math.acosh((math.cosh(3) + 1) / 2)
    assert numerics.sample_inverse_cdf(np.sinh, (0, 3), 0.5) == pytest.approx(expected, abs=1e-9)


def test_inverse_cdf_endpoints():
    assert numerics.sample_inverse_cdf(np.cosh, (0.5, 2.0), 0.0) == 0.5
    assert numerics.sample_inverse_cdf(np.cosh, (0.5, 2.0), 1.0) == 2.0


def test_inverse_cdf_zero_mass():
    with pytest.raises(InputError):
        numerics.InverseCDFSampler(lambda r: 0.0 * r, (0, 1))


def test_inverse_cdf_ks():
    sampler = numerics.InverseCDFSampler(np.sinh, (0.0, 3.0))
    u = numerics.RngStream(77).generator().random(10**5)
    x = sampler.quantile(u)
    target = lambda r: (np.cosh(r) - 1) / (math.cosh(3) - 1)
    d = stats.kstest(x, target).statistic
    assert d < 1.63 / math.sqrt(len(x))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 1.0))
def test_inverse_cdf_roundtrip(u):
    sampler = numerics.InverseCDFSampler(lambda r: r**2 * np.exp(-r), (0.0, 6.0))
    x = sampler.quantile(u)
    assert sampler.cdf(x) == pytest.approx(u, abs=1e-9)


# --- line fits -------------------------------------------------------------


def test_fit_line_collinear():
    fit = numerics.fit_line([(0, 1), (1, 3), (2, 5)])
    assert fit.slope == pytest.approx(2)
    assert fit.intercept == pytest.approx(1)
    assert fit.r_squared == pytest.approx(1)


def test_fit_line_weibull_transform():
    r = np.array([1.0, 2.0, 3.0])
    s = np.exp(-(r**3))
    fit = numerics.fit_line(np.log(r), np.log(-np.log(s)))
    assert fit.slope == pytest.approx(3.0, abs=1e-12)


def test_fit_line_symmetric():
    assert numerics.fit_line([(0, 0), (1, 1), (2, 0)]).slope == pytest.approx(0.0, abs=1e-15)


def test_fit_line_degenerate():
    with pytest.raises(InputError):
        numerics.fit_line([(1, 0), (1, 1), (1, 2)])
    with pytest.raises(InputError):
        numerics.fit_line([(1, 0)])


def test_ks_constants():
    assert numerics.ks_critical_value(0.01) == 1.628
    assert numerics.ks_critical_value(0.05) == 1.358
    assert numerics.ks_critical_value(0.1) == pytest.approx(1.2239, abs=1e-3)
