from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import special

from cpwall.specfun import (
    GK21,
    ConvergenceError,
    ExponentialTruncation,
    IntervalDoubling,
    QuadratureSpec,
    bessel_j0,
    bessel_j0_j1,
    bessel_j1,
    exponential_cutoff,
    gauss_kronrod,
    integrate,
)


def exact_series(nu: int, x: Fraction, terms: int = 60) -> float:
    # rational partial sums; truncation far below double precision for x <= 6
    z = x * x / 4
    total = Fraction(0)
    term = (x / 2) ** nu / math.factorial(nu)
    for m in range(terms):
        total += term
        term = -term * z / ((m + 1) * (m + 1 + nu))
    return float(total)


class TestBessel:
    def test_values_at_zero(self):
        assert bessel_j0(0.0) == 1.0
        assert bessel_j1(0.0) == 0.0

    @pytest.mark.parametrize("x", ["0.1", "1", "2.5", "4", "5.9", "6"])
    def test_series_region_against_rational_oracle(self, x):
        xf = Fraction(x)
        j0, j1 = bessel_j0_j1(float(xf))
        assert j0 == pytest.approx(exact_series(0, xf), abs=1e-14)
        assert j1 == pytest.approx(exact_series(1, xf), abs=1e-14)

    def test_all_regimes_against_mpmath(self):
        xs = np.concatenate([np.linspace(0, 50, 1001), [6.0000001, 19.9999, 20.0001, 80.0, 500.0]])
        j0, j1 = bessel_j0_j1(xs)
        ref0 = np.array([float(mpmath.besselj(0, x)) for x in xs])
        ref1 = np.array([float(mpmath.besselj(1, x)) for x in xs])
        assert np.max(np.abs(j0 - ref0)) < 5e-15
        assert np.max(np.abs(j1 - ref1)) < 5e-15

    def test_shapes_and_scalars(self):
        assert isinstance(bessel_j0(1.0), float)
        out = bessel_j1(np.ones((2, 3)))
        assert out.shape == (2, 3)

    @pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
    def test_rejects_bad_arguments(self, bad):
        with pytest.raises(ValueError):
            bessel_j0(bad)

    def test_wronskian_like_identity(self):
        # J0' = -J1, checked by central differences
        x = np.linspace(0.5, 30, 60)
        h = 1e-5
        deriv = (bessel_j0(x + h) - bessel_j0(x - h)) / (2 * h)
        assert np.allclose(deriv, -bessel_j1(x), atol=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 200.0))
    def test_matches_scipy(self, x):
        assert bessel_j0(x) == pytest.approx(special.j0(x), abs=1e-14)
        assert bessel_j1(x) == pytest.approx(special.j1(x), abs=1e-14)

    def test_first_zeros(self):
        zeros = [2.404825557695773, 5.520078110286311, 8.653727912911013]
        assert np.max(np.abs(bessel_j0(np.array(zeros)))) < 1e-15


class TestGaussKronrod:
    def test_rule_exact_for_degree_31(self):
        for p in range(0, 32):
            got = float(np.sum(GK21.kronrod_weights * GK21.nodes**p))
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            assert got == pytest.approx(exact, abs=1e-15)

    def test_gauss_subrule_exact_for_degree_19(self):
        for p in range(0, 20):
            got = float(np.sum(GK21.gauss_weights * GK21.nodes**p))
            exact = 0.0 if p % 2 else 2.0 / (p + 1)
            assert got == pytest.approx(exact, abs=1e-15)

    def test_single_panel(self):
        res = gauss_kronrod(np.exp, 0.0, 1.0)
        assert res.value == pytest.approx(math.e - 1, rel=1e-15)

    def test_exact_agreement_gives_zero_error(self):
        res = gauss_kronrod(lambda x: x**3, 0.0, 2.0)
        assert res.value == pytest.approx(4.0, rel=1e-15)
        assert res.error_estimate < 1e-13


class TestIntegrate:
    def test_finite_oscillatory(self):
        res = integrate(lambda x: np.cos(40 * x) * np.exp(-x), 0.0, 3.0)
        ref, _ = sint.quad(lambda x: math.cos(40 * x) * math.exp(-x), 0, 3, limit=500, epsabs=1e-14)
        assert res.converged
        assert res.value == pytest.approx(ref, rel=1e-10)

    def test_reversed_and_empty(self):
        assert integrate(np.sin, 1.0, 1.0).value == 0.0
        fwd = integrate(np.sin, 0.0, 2.0).value
        assert integrate(np.sin, 2.0, 0.0).value == pytest.approx(-fwd, rel=1e-15)

    def test_semi_infinite_doubling(self):
        res = integrate(lambda x: 1.0 / (1.0 + x * x), 0.0, math.inf)
        assert res.value == pytest.approx(math.pi / 2, rel=1e-9)

    def test_whole_line(self):
        res = integrate(lambda x: np.exp(-x * x), -math.inf, math.inf)
        assert res.value == pytest.approx(math.sqrt(math.pi), rel=1e-10)

    def test_lower_semi_infinite(self):
        res = integrate(np.exp, -math.inf, 0.0)
        assert res.value == pytest.approx(1.0, rel=1e-10)

    def test_exponential_truncation_policy(self):
        spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14,
                              semi_infinite_policy=ExponentialTruncation(1e-3))
        res = integrate(lambda k: k**3 * np.exp(-2 * k) * np.cos(k), 0.0, math.inf, spec)
        # Re int k^3 exp(-(2 - i) k) dk = Re 6/(2 - i)^4
        assert res.value == pytest.approx((6 / (2 - 1j) ** 4).real, rel=1e-9)

    def test_vector_valued(self):
        res = integrate(lambda x: np.stack([np.sin(x), np.cos(x), 0 * x], axis=-1), 0.0, math.pi)
        assert np.allclose(res.value, [2.0, 0.0, 0.0], atol=1e-13)

    def test_scalar_callable(self):
        res = integrate(lambda x: math.sqrt(x), 0.0, 1.0, vectorized=False)
        assert res.value == pytest.approx(2 / 3, rel=1e-9)

    def test_budget_exhaustion_reports_partial(self):
        spec = QuadratureSpec(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=3)
        res = integrate(lambda x: np.sin(1.0 / (x + 1e-3)), 0.0, 1.0, spec)
        assert not res.converged
        assert math.isfinite(res.value)

    def test_doubling_policy_validation(self):
        with pytest.raises(ValueError):
            IntervalDoubling(convergence_factor=0)
        with pytest.raises(ValueError):
            QuadratureSpec(rel_tol=0)

    def test_convergence_error_carries_result(self):
        res = gauss_kronrod(np.sin, 0, 1)
        err = ConvergenceError("x", res)
        assert err.result is res


class TestExponentialCutoff:
    @pytest.mark.parametrize("power,rate,level", [(3, 1.0, 1e-12), (3, 0.08, 1e-9), (0, 2.0, 1e-5)])
    def test_root_and_side(self, power, rate, level):
        t = exponential_cutoff(power, rate, level)
        assert t > power / rate
        assert t**power * math.exp(-rate * t) == pytest.approx(level, rel=1e-9)

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            exponential_cutoff(3, 0.0, 1e-3)
