"""Acceptance suite: one or more tests per numbered criterion.

A pass/fail line per criterion is printed in the terminal summary.
"""

from __future__ import annotations

import math
import random
import time
from functools import partial

import mpmath
import numpy as np
import pytest
from scipy import integrate as sint
from scipy.optimize import brentq
from scipy.stats import qmc

from cpwall import closedform as cf
from cpwall import modesum as ms
from cpwall.quadpath import plane_wave_identity_check
from cpwall.specfun import bessel_j0, bessel_j0_j1
from cpwall.units import PhysicalSetup, UnitSystem

from conftest import cached_integrated_force, cached_sigma_quad

pytestmark = pytest.mark.acceptance

CROSS_POINTS = (0.0, 0.25, 0.5, 1.0, 2.0, 5.0)


def cross_path_deviation(density) -> float:
    """Worst relative deviation of the quadrature path from ``density``."""
    return max(abs(cached_sigma_quad(u).total / density(u) - 1.0) for u in CROSS_POINTS)


@pytest.mark.criterion(1)
def test_plate_integral_equals_six_pi():
    t0 = time.perf_counter()
    res = cf.plate_integral()
    elapsed = time.perf_counter() - t0
    assert res.converged
    assert abs(res.value / (6.0 * math.pi) - 1.0) <= 1e-8
    assert elapsed < 1.0


@pytest.mark.criterion(2)
def test_action_reaction_bitwise():
    rng = random.Random(11)
    for _ in range(100):
        setup = PhysicalSetup(10 ** rng.uniform(-33, 3), 10 ** rng.uniform(-10, 2),
                              rng.choice(list(UnitSystem)))
        assert cf.wall_force(setup) + cf.atom_force(setup) == 0.0


@pytest.mark.criterion(3)
@pytest.mark.slow
def test_cross_path_equivalence():
    t0 = time.perf_counter()
    dev = cross_path_deviation(cf.sigma_hat)
    assert dev <= 1e-4
    assert time.perf_counter() - t0 < 300.0


@pytest.mark.criterion(3)
@pytest.mark.slow
def test_cross_path_reference_values():
    # the u = 1 example value quoted to six digits
    assert cached_sigma_quad(1.0).total == pytest.approx(1.193243, abs=2e-6)
    zero = cached_sigma_quad(0.0)
    assert zero.contributions["I3"] == 0.0 and zero.contributions["I4"] == 0.0


@pytest.mark.criterion(4)
@pytest.mark.slow
def test_integrated_quadrature_profile():
    force = cached_integrated_force()
    assert max(force.u_nodes) <= 20.0
    assert abs(force.value / (6.0 * math.pi) - 1.0) <= 1e-3


@pytest.mark.criterion(5)
def test_scaling_law():
    base = PhysicalSetup(2.5e-30, 3e-7, UnitSystem.SI)
    for lam in (0.1, 2.0, 10.0):
        scaled = PhysicalSetup(base.alpha, lam * base.d, UnitSystem.SI)
        for rho in (0.0, 1e-7, 4e-7, 2e-6):
            lhs = cf.sigma_physical(lam * rho, scaled)
            rhs = lam**-7 * cf.sigma_physical(rho, base)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=0.0)


def _series(nu: int, x: float) -> float:
    mpmath.mp.dps = 40
    z = mpmath.mpf(x) / 2
    total, m = mpmath.mpf(0), 0
    while True:
        term = (-1) ** m * z ** (2 * m + nu) / (mpmath.factorial(m) * mpmath.factorial(m + nu))
        total += term
        if m > 5 and abs(term) < mpmath.mpf(10) ** -35:
            return float(total)
        m += 1


@pytest.mark.criterion(6)
def test_bessel_against_series_oracle():
    xs = np.linspace(0.0, 10.0, 201)
    j0, j1 = bessel_j0_j1(xs)
    for x, a, b in zip(xs, j0, j1):
        assert abs(a - _series(0, x)) <= 1e-12
        assert abs(b - _series(1, x)) <= 1e-12


@pytest.mark.criterion(6)
def test_bessel_first_zero():
    root = brentq(bessel_j0, 2.0, 3.0, xtol=1e-15, rtol=1e-15)
    assert abs(root - 2.404825557695773) <= 1e-10


@pytest.mark.criterion(7)
def test_plane_wave_identity_random_triples():
    rng = np.random.default_rng(5)
    for k, d, rho in rng.uniform(0.1, 10.0, size=(20, 3)):
        lhs, rhs = plane_wave_identity_check(k, d, rho)
        assert abs(lhs - rhs) <= 1e-8


def _mc_norm(mode: ms.Mode, box: ms.ModeBox, n: int = 2**18) -> float:
    pts = qmc.Sobol(3, seed=3).random(n)
    lo = np.array([-box.L1 / 2, -box.L1 / 2, box.L])
    hi = np.array([box.L1 / 2, box.L1 / 2, box.L1])
    r = lo + pts * (hi - lo)
    f = ms._mode_fields(np.atleast_2d(mode.kvec), np.atleast_2d(mode.evec), r.T, box)
    return float(np.mean(np.sum(f * f, axis=1)))


@pytest.mark.criterion(8)
def test_mode_structure_suite():
    box = ms.ModeBox(0.5, 3.0, 5)
    modes = list(ms.enumerate_modes(box))
    rng = np.random.default_rng(9)
    for mode in modes:
        assert abs(np.dot(mode.evec, mode.kvec)) <= 1e-12 * mode.k
        x, y = rng.uniform(-1.5, 1.5, size=2)
        f = ms.mode_function(mode, (x, y, box.L), box)
        assert f[0] == 0.0 and f[1] == 0.0
    for k in rng.normal(size=(20, 3)):
        e1, e2 = ms.polarization_basis(k)
        assert np.allclose(np.outer(e1, e1) + np.outer(e2, e2), ms.transverse_projector(k),
                           atol=1e-12, rtol=0)
    setup = PhysicalSetup(1.0, 1.0)
    for _ in range(30):
        a, b = (modes[i] for i in rng.integers(len(modes), size=2))
        x, y = rng.uniform(-1.5, 1.5, size=2)
        assert ms.stress_coeff_B(a, b, x, y, box) == ms.stress_coeff_B(b, a, x, y, box)
        assert ms.dressed_amplitude(a, b, setup, box) == pytest.approx(
            ms.dressed_amplitude(b, a, setup, box), rel=1e-14, abs=1e-300)


@pytest.mark.criterion(8)
def test_mode_normalization_monte_carlo():
    box = ms.ModeBox(0.5, 3.0, 5)
    modes = list(ms.enumerate_modes(box))
    picks = [m for m in modes if np.count_nonzero(m.kvec) == 2][:3]
    picks += [m for m in modes if np.count_nonzero(m.kvec) == 3][::97][:4]
    for mode in picks:
        assert _mc_norm(mode, box) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.criterion(8)
@pytest.mark.slow
def test_mode_convergence_direction():
    rows = list(ms.convergence_study(with_reference=False))
    assert len(rows) == len(ms.DEFAULT_SCHEDULE)
    assert abs(rows[-1].deviation) < abs(rows[0].deviation)


@pytest.mark.criterion(9)
def test_enclosed_fraction_and_half_radius():
    def oracle_fraction(R):
        val, _ = sint.quad(lambda u: 2 * math.pi * u * (17 + 10 * u * u) / (1 + u * u) ** 4.5,
                           0.0, R, epsabs=1e-14, epsrel=1e-13)
        return val / (6.0 * math.pi)

    frac = cf.enclosed_force_fraction(1.0)
    assert abs(frac - 0.852686) <= 1e-6
    assert abs(frac - oracle_fraction(1.0)) <= 1e-10

    R = cf.half_force_radius()
    assert abs(R - 0.5293) <= 1e-3
    oracle_R = brentq(lambda r: oracle_fraction(r) - 0.5, 0.1, 2.0, xtol=1e-13)
    assert abs(R - oracle_R) <= 1e-10


@pytest.mark.criterion(10)
@pytest.mark.slow
def test_negative_control_breaks_cross_path():
    wrong = partial(cf.reduced_density, near=16.0)
    assert cross_path_deviation(cf.sigma_hat) <= 1e-4
    assert cross_path_deviation(wrong) > 1e-4
