"""Closed-form atom-wall results and plate-engineering quantities.

Reduced variables throughout: ``u = rho / d`` and density in units of
``hbar c alpha / (4 pi^2 d^7)``, in which

    sigma_hat(u) = (17 + 10 u^2) / (1 + u^2)^(9/2).

Forces come out in units of ``hbar c alpha / (4 pi^2 d^5)`` and torques in
units of ``hbar c alpha / (4 pi^2 d^4)`` unless a setup is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .specfun import ConvergenceError, QuadratureSpec, integrate
from .units import DEFAULT_CONSTANTS, Constants, PhysicalSetup, density_scale

__all__ = [
    "Method",
    "RadialProfile",
    "ForceReport",
    "PlateRegion",
    "reduced_density",
    "sigma_hat",
    "sigma_physical",
    "radial_profile",
    "atom_force",
    "wall_force",
    "plate_integral",
    "enclosed_force_fraction",
    "half_force_radius",
    "torque_about_axis",
    "REDUCED_TOTAL_FORCE",
    "DEFAULT_SPEC",
]

#: 2 pi * int_0^inf u sigma_hat(u) du
REDUCED_TOTAL_FORCE = 6.0 * math.pi

DEFAULT_SPEC = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-13)
ROOT_TOL = 1e-12


class Method(str, Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"
    MODE_SUM = "mode_sum"


@dataclass(frozen=True)
class RadialProfile:
    grid: tuple[float, ...]
    values: tuple[float, ...]
    method: Method
    extra: dict[str, tuple[float, ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        v = np.asarray(self.values, float)
        if g.shape != v.shape or g.ndim != 1 or g.size == 0:
            raise ValueError("grid and values must be matching non-empty 1-D sequences")
        if np.any(g < 0) or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing with u >= 0")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("profile values must be finite and > 0")
        object.__setattr__(self, "method", Method(self.method))


@dataclass(frozen=True)
class ForceReport:
    """A computed value with provenance and uncertainty."""

    value: float
    method: str
    error_estimate: float = 0.0
    units: str = "reduced"
    breakdown: dict[str, float] = field(default_factory=dict)


def reduced_density(u, near: float = 17.0, far: float = 10.0):
    """``(near + far u^2) / (1 + u^2)^(9/2)`` for scalar or array ``u``."""
    ua = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(ua)) or np.any(ua < 0):
        raise ValueError("u must be finite and >= 0")
    u2 = ua * ua
    out = (near + far * u2) / (1.0 + u2) ** 4.5
    return float(out) if out.ndim == 0 else out


def sigma_hat(u):
    """Reduced force density at in-plane distance ``u`` (units of d).

    >>> sigma_hat(0.0)
    17.0
    """
    return reduced_density(u)


def sigma_physical(rho: float, setup: PhysicalSetup, constants: Constants = DEFAULT_CONSTANTS) -> float:
    """Force per unit area on the wall at distance ``rho`` from the foot point."""
    if not (math.isfinite(rho) and rho >= 0):
        raise ValueError("rho must be finite and >= 0")
    return density_scale(setup, constants) * sigma_hat(rho / setup.d)


def radial_profile(grid: Sequence[float]) -> RadialProfile:
    g = tuple(float(u) for u in grid)
    return RadialProfile(g, tuple(float(v) for v in np.atleast_1d(sigma_hat(np.array(g)))),
                         Method.CLOSED_FORM)


def atom_force(setup: PhysicalSetup, constants: Constants = DEFAULT_CONSTANTS) -> float:
    """Force on the atom along the wall normal; negative means attraction."""
    hc = constants.hbar_c_in(setup.unit_system)
    return -3.0 * hc * setup.alpha / (2.0 * math.pi * setup.d**5)


def wall_force(setup: PhysicalSetup, constants: Constants = DEFAULT_CONSTANTS) -> float:
    """Total force on the wall, the reaction to :func:`atom_force`."""
    return -atom_force(setup, constants)


def plate_integral(density=sigma_hat, spec: QuadratureSpec = DEFAULT_SPEC, upper: float = math.inf):
    """``2 pi int_0^upper u * density(u) du`` by adaptive quadrature."""
    return integrate(lambda u: 2.0 * math.pi * u * density(u), 0.0, upper, spec)


def enclosed_force_fraction(R: float) -> float:
    """Share of the total wall force carried by the disk of radius ``R`` (units of d)."""
    if math.isnan(R) or R < 0:
        raise ValueError("R must be >= 0")
    if math.isinf(R):
        return 1.0
    # 1 - (2 t^(-5/2) + t^(-7/2)) / 3 with t = 1 + R^2, written with
    # expm1/log1p so that small R keeps full relative precision
    log_t = math.log1p(R * R)
    return -(2.0 * math.expm1(-2.5 * log_t) + math.expm1(-3.5 * log_t)) / 3.0


def half_force_radius(tol: float = ROOT_TOL) -> float:
    """Radius (units of d) of the disk carrying half the wall force."""
    return brentq(lambda R: enclosed_force_fraction(R) - 0.5, 0.0, 10.0, xtol=tol, rtol=4 * np.finfo(float).eps)


class RegionKind(str, Enum):
    FULL_PLANE = "full_plane"
    DISK = "disk"
    ANNULUS = "annulus"
    HALF_PLANE = "half_plane"


@dataclass(frozen=True)
class PlateRegion:
    """Integration domain on the plate, lengths in units of d.

    Disks and annuli are centred on the foot point P. ``half_plane(a)`` is
    the set ``x > a`` in plate coordinates centred on P.
    """

    kind: RegionKind
    r_inner: float = 0.0
    r_outer: float = math.inf
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RegionKind(self.kind))
        if self.kind in (RegionKind.DISK, RegionKind.ANNULUS):
            if not (0 <= self.r_inner < self.r_outer) or math.isinf(self.r_outer):
                raise ValueError("need 0 <= R1 < R2 < inf")
            if self.kind is RegionKind.DISK and not self.r_outer > 0:
                raise ValueError("disk radius must be > 0")
        if not math.isfinite(self.offset):
            raise ValueError("half-plane offset must be finite")

    @classmethod
    def full_plane(cls) -> "PlateRegion":
        return cls(RegionKind.FULL_PLANE)

    @classmethod
    def disk(cls, R: float) -> "PlateRegion":
        return cls(RegionKind.DISK, 0.0, R)

    @classmethod
    def annulus(cls, R1: float, R2: float) -> "PlateRegion":
        return cls(RegionKind.ANNULUS, R1, R2)

    @classmethod
    def half_plane(cls, offset: float = 0.0) -> "PlateRegion":
        return cls(RegionKind.HALF_PLANE, offset=offset)


def _lever(x, y, axis_angle: float):
    # signed distance from the in-plane axis through P with direction
    # (cos a, sin a); positive on the side the axis normal (sin a, -cos a) points to
    return x * math.sin(axis_angle) - y * math.cos(axis_angle)


def torque_about_axis(
    region: PlateRegion,
    axis_angle: float = math.pi / 2,
    spec: QuadratureSpec = DEFAULT_SPEC,
    setup: PhysicalSetup | None = None,
    constants: Constants = DEFAULT_CONSTANTS,
    density=sigma_hat,
) -> ForceReport:
    """Torque of the normal force density about an in-plane axis through P.

    The default axis is the y axis, whose lever arm is ``+x``; the half
    plane ``x > 0`` then gets a positive torque. Reduced units unless
    ``setup`` is given.
    """
    # Inner integrals can cancel to zero (centred regions, tilted axes), so
    # their absolute tolerance is tied to the size of the integrand instead.
    def inner_spec(scale: float) -> QuadratureSpec:
        return spec.replace(abs_tol=max(spec.abs_tol * 1e-3, spec.rel_tol * 1e-2 * scale))

    if region.kind is RegionKind.HALF_PLANE:

        def column(x: float) -> float:
            f = lambda y: density(np.hypot(x, y)) * _lever(x, y, axis_angle)
            scale = (1.0 + abs(x)) ** 2 * density(abs(x))
            res = integrate(f, -math.inf, math.inf, inner_spec(scale))
            if not res.converged:
                raise ConvergenceError(f"inner torque integral failed at x={x}", res)
            return res.value

        res = integrate(column, region.offset, math.inf, spec, vectorized=False)
    else:

        def ring(rho: float) -> float:
            f = lambda phi: density(rho) * _lever(rho * np.cos(phi), rho * np.sin(phi), axis_angle) * rho
            res = integrate(f, 0.0, 2.0 * math.pi, inner_spec(4.0 * rho * rho * density(rho)),
                            initial_panels=4)
            if not res.converged:
                raise ConvergenceError(f"angular torque integral failed at rho={rho}", res)
            return res.value

        res = integrate(ring, region.r_inner, region.r_outer, spec, vectorized=False)

    if not res.converged:
        raise ConvergenceError("torque quadrature did not converge", res)
    value, err, units = float(res.value), float(res.error_estimate), "reduced"
    if setup is not None:
        scale = density_scale(setup, constants) * setup.d**3
        value, err = value * scale, err * scale
        units = setup.unit_system.value
    return ForceReport(value, "adaptive_2d", err, units,
                       {"axis_angle": axis_angle, "evaluations": float(res.evaluations)})
