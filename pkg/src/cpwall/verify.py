"""Bundled cross-path and invariant checks behind ``cpwall verify``."""

from __future__ import annotations

import math
import random
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import closedform as cf
from . import modesum as ms
from .quadpath import plane_wave_identity_check, sigma_quad
from .specfun import bessel_j0
from .units import PhysicalSetup, UnitSystem

__all__ = ["Check", "VerificationReport", "run_verification", "CROSS_PATH_POINTS", "CHECK_NAMES"]

CROSS_PATH_POINTS = (0.0, 0.25, 0.5, 1.0, 2.0, 5.0)
QUICK_CROSS_PATH_POINTS = (0.0, 1.0)
J0_FIRST_ZERO = 2.404825557695773

CHECK_NAMES = (
    "plate_integral",
    "action_reaction",
    "enclosed_fraction",
    "half_force_radius",
    "bessel_first_zero",
    "plane_wave_identity",
    "scaling_law",
    "cross_path",
    "torque_symmetry",
    "mode_structure",
    "alpha_linearity",
    "mode_convergence",
)


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    computed: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b else abs(a)


def _check(name, expected, computed, tol, *, relative=True, detail="") -> Check:
    dev = _rel(computed, expected) if relative else abs(computed - expected)
    return Check(name, float(expected), float(computed), float(tol),
                 bool(dev <= tol), detail or f"deviation {dev:.3e}")


def _enclosed_oracle(density, R: float) -> float:
    return cf.plate_integral(density, upper=R).value / cf.REDUCED_TOTAL_FORCE


def _structure_violation(seed: int = 7) -> float:
    """Largest structural defect over a small box: transversality, projector,
    wall zeros, exchange symmetry of B and of dressed amplitudes."""
    box = ms.ModeBox(0.5, 2.5, 4)
    modes = list(ms.enumerate_modes(box))
    rng = np.random.default_rng(seed)
    setup = PhysicalSetup(1.0, 1.0)
    worst = 0.0
    for mode in modes:
        worst = max(worst, abs(float(np.dot(mode.evec, mode.kvec))))
    for _ in range(16):
        k = rng.normal(size=3)
        e1, e2 = ms.polarization_basis(k)
        worst = max(worst, float(np.abs(np.outer(e1, e1) + np.outer(e2, e2)
                                        - ms.transverse_projector(k)).max()))
    for _ in range(16):
        a, b = (modes[i] for i in rng.integers(len(modes), size=2))
        x, y = rng.uniform(-1.2, 1.2, size=2)
        f = ms.mode_function(a, (x, y, box.L), box)
        worst = max(worst, abs(f[0]), abs(f[1]))
        worst = max(worst, abs(ms.stress_coeff_B(a, b, x, y, box) - ms.stress_coeff_B(b, a, x, y, box)))
        worst = max(worst, abs(ms.dressed_amplitude(a, b, setup, box) - ms.dressed_amplitude(b, a, setup, box)))
    return worst


def run_verification(density: Callable = cf.sigma_hat, *, quick: bool = False,
                     seed: int = 2024) -> VerificationReport:
    """Run every check; ``density`` replaces the closed form (negative control hook).

    ``quick`` trims the cross-path points and skips the mode-sum
    convergence study.
    """
    rng = random.Random(seed)
    checks: list[Check] = []

    res = cf.plate_integral(density)
    checks.append(_check("plate_integral", cf.REDUCED_TOTAL_FORCE, res.value, 1e-8))

    worst = 0.0
    for _ in range(100):
        s = PhysicalSetup(10 ** rng.uniform(-32, 2), 10 ** rng.uniform(-9, 1),
                          rng.choice(list(UnitSystem)))
        worst = max(worst, abs(cf.wall_force(s) + cf.atom_force(s)))
    checks.append(Check("action_reaction", 0.0, worst, 0.0, worst == 0.0, "100 random setups"))

    checks.append(_check("enclosed_fraction", cf.enclosed_force_fraction(1.0),
                         _enclosed_oracle(density, 1.0), 1e-6, relative=False,
                         detail="closed form vs quadrature at R = d"))
    R_half = cf.half_force_radius()
    checks.append(_check("half_force_radius", R_half,
                         brentq(lambda R: _enclosed_oracle(density, R) - 0.5, 0.1, 2.0, xtol=1e-10),
                         1e-3, relative=False, detail="closed-form root vs quadrature root"))

    checks.append(_check("bessel_first_zero", J0_FIRST_ZERO,
                         brentq(bessel_j0, 2.0, 3.0, xtol=1e-14), 1e-10, relative=False))

    worst = 0.0
    for _ in range(20):
        k, d, rho = (rng.uniform(0.1, 10.0) for _ in range(3))
        lhs, rhs = plane_wave_identity_check(k, d, rho)
        worst = max(worst, abs(lhs - rhs))
    checks.append(Check("plane_wave_identity", 0.0, worst, 1e-8, worst <= 1e-8, "20 random (k, d, rho)"))

    base = PhysicalSetup(1.0, 1.0)
    worst = 0.0
    for lam in (0.1, 2.0, 10.0):
        scaled = PhysicalSetup(1.0, lam)
        for rho in (0.0, 0.7, 3.0):
            lhs = cf.sigma_physical(lam * rho, scaled)
            worst = max(worst, _rel(lhs, lam**-7 * cf.sigma_physical(rho, base)))
    checks.append(Check("scaling_law", 0.0, worst, 1e-12, worst <= 1e-12, "lambda in {0.1, 2, 10}"))

    worst, where = 0.0, 0.0
    for u in QUICK_CROSS_PATH_POINTS if quick else CROSS_PATH_POINTS:
        dev = _rel(sigma_quad(u).total, float(density(u)))
        if dev >= worst:
            worst, where = dev, u
    checks.append(Check("cross_path", 0.0, worst, 1e-4, worst <= 1e-4, f"worst at u = {where:g}"))

    full = cf.torque_about_axis(cf.PlateRegion.full_plane(), density=density)
    checks.append(Check("torque_symmetry", 0.0, full.value, 1e-9, abs(full.value) <= 1e-9,
                        "full-plane torque"))

    worst = _structure_violation()
    checks.append(Check("mode_structure", 0.0, worst, 1e-12, worst <= 1e-12,
                        "transversality, projector, wall zeros, exchange symmetry"))

    # coarse box on purpose: linearity in alpha does not need resolution
    box = ms.ModeBox(0.5, 2.5, 6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ms.CutoffUnderflowWarning)
        one = ms.sigma_modesum(0.2, 0.1, box, PhysicalSetup(1.0, 1.0), 1.5, reduced=False)
        two = ms.sigma_modesum(0.2, 0.1, box, PhysicalSetup(2.0, 1.0), 1.5, reduced=False)
    checks.append(_check("alpha_linearity", 2.0 * one, two, 1e-14))

    if not quick:
        rows = list(ms.convergence_study(with_reference=False))
        first, last = abs(rows[0].deviation), abs(rows[-1].deviation)
        checks.append(Check("mode_convergence", first, last, first, last < first,
                            "final |deviation| below initial along the default schedule"))
    return VerificationReport(tuple(checks))
