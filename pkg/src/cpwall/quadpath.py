"""Nested-quadrature evaluation of the force density from its integral form.

The density is written through four regulated wavenumber integrals

    I_n(x) = int_0^inf dk k^3 exp(-k x) K_n(k),

with angular kernels ``K_n`` (theta integrals of trigonometric factors
times J0 or J1), and

    sigma_hat = (d^7 / pi) * int_0^inf dx [I1^2 + 2 I2^2 + I3^2 + I4^2]

in the reduced units of :mod:`cpwall.closedform`. The integration order
is theta (finite), then k (exponentially truncated), then x.

Two practical points shape the implementation:

* ``K_n`` does not depend on x, so the k-integral is organised as a table
  of kernel values on adaptively refined Gauss-Kronrod k-panels; every
  x-node then costs one matrix product.
* As x -> 0 the k-range needed grows like 1/x. Below a floor
  ``x_f = x_floor * r`` (``r = sqrt(d^2 + rho^2)``) the x-integrand is
  replaced by a polynomial fitted on ``[x_f, 4 x_f]``; the integrand is
  analytic there, and the difference between two fit degrees is reported
  as the extrapolation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .specfun import (
    GK21,
    ConvergenceError,
    ExponentialTruncation,
    IntervalDoubling,
    QuadratureSpec,
    bessel_j0_j1,
    exponential_cutoff,
    integrate,
)

__all__ = [
    "KernelId",
    "IntegralBreakdown",
    "angular_kernel",
    "angular_kernels",
    "plane_wave_identity_check",
    "big_I",
    "density_integral",
    "sigma_quad",
    "IntegratedForce",
    "integrated_force",
    "CROSS_PATH_SPEC",
    "THETA_SPEC",
]


class KernelId(str, Enum):
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"
    I4 = "I4"

    @property
    def index(self) -> int:
        return int(self.value[1]) - 1


#: coefficient of each squared integral in the x-integrand
WEIGHTS = np.array([1.0, 2.0, 1.0, 1.0])

#: per-level tolerance used for the cross-path comparison
CROSS_PATH_SPEC = QuadratureSpec(
    rel_tol=1e-6, abs_tol=1e-12, semi_infinite_policy=ExponentialTruncation(1e-3)
)

# The k-integrals cancel strongly at small x (amplification ~ x_f^-3), so
# the angular kernels are always computed tightly, whatever the outer spec.
THETA_SPEC = QuadratureSpec(rel_tol=1e-11, abs_tol=1e-13, max_subdivisions=20000)

_FLOOR_NODES = 12
_FLOOR_DEGREES = (8, 6)
_FLOOR_SPAN = 3.0  # fit window is [x_f, (1 + span) x_f]


def _theta_integrand(theta: np.ndarray, k: np.ndarray, d: float, rho: float) -> np.ndarray:
    """All four angular integrands at theta (m,) and k (n,) -> (m, n, 4)."""
    s = np.sin(theta)[:, None]
    c = np.cos(theta)[:, None]
    phase = c * (k * d)[None, :]
    cos_p = np.cos(phase)
    sin_p = np.sin(phase)
    j0, j1 = bessel_j0_j1(s * (k * rho)[None, :])
    out = np.empty(phase.shape + (4,))
    out[..., 0] = s**3 * cos_p * j0
    out[..., 1] = s * c * sin_p * j0
    out[..., 2] = s**2 * cos_p * j1
    out[..., 3] = s**2 * c * sin_p * j1
    return out


def _theta_panels(k_max: float, d: float, rho: float) -> int:
    # the theta-phase advances at most k*r per radian; ~5 rad per panel
    return int(math.ceil(k_max * math.hypot(d, rho) * math.pi / 5.0)) + 1


def angular_kernels(k, d: float, rho: float, spec: QuadratureSpec = THETA_SPEC):
    """theta-integrals of all four kernels at every ``k``.

    Returns ``(values, errors)``, both of shape ``(len(k), 4)``; raises
    :class:`ConvergenceError` if the budget runs out.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k < 0) or d <= 0 or rho < 0:
        raise ValueError("need k >= 0, d > 0, rho >= 0")
    res = integrate(
        lambda th: _theta_integrand(th, k, d, rho),
        0.0,
        math.pi,
        spec,
        initial_panels=_theta_panels(float(k.max(initial=0.0)), d, rho),
    )
    if not res.converged:
        raise ConvergenceError("angular kernel quadrature did not converge", res)
    return np.asarray(res.value), np.asarray(res.error_estimate)


def angular_kernel(kernel: KernelId | str, k: float, d: float, rho: float,
                   spec: QuadratureSpec = THETA_SPEC) -> float:
    """Single angular kernel, e.g. ``int sin^3 cos(kd cos) J0(k rho sin) dtheta``."""
    values, _ = angular_kernels([k], d, rho, spec)
    return float(values[0, KernelId(kernel).index])


def plane_wave_identity_check(k: float, d: float, rho: float,
                              spec: QuadratureSpec = THETA_SPEC) -> tuple[float, float]:
    """Both sides of

        int_0^pi sin t cos(k d cos t) J0(k rho sin t) dt = 2 sin(k r) / (k r).

    The left side is computed by quadrature, the right side in closed form.
    """
    if k <= 0 or d <= 0 or rho < 0:
        raise ValueError("need k > 0, d > 0, rho >= 0")

    def f(th):
        j0, _ = bessel_j0_j1(k * rho * np.sin(th))
        return np.sin(th) * np.cos(k * d * np.cos(th)) * j0

    res = integrate(f, 0.0, math.pi, spec, initial_panels=_theta_panels(k, d, rho))
    if not res.converged:
        raise ConvergenceError("identity check quadrature did not converge", res)
    kr = k * math.hypot(d, rho)
    return float(res.value), 2.0 * math.sin(kr) / kr


def _k_cutoff(x: float, spec: QuadratureSpec, scale: float = 1.0) -> float:
    # |K_n| <= 2, so dropping k^3 exp(-k x) below threshold * tol(scale)
    # bounds the truncation error relative to an integral of size ``scale``
    pol = spec.semi_infinite_policy
    threshold = pol.threshold if isinstance(pol, ExponentialTruncation) else 1e-3
    return exponential_cutoff(3.0, x, threshold * float(spec.tolerance(scale)))


def big_I(kernel: KernelId | str, x: float, d: float, rho: float,
          spec: QuadratureSpec = CROSS_PATH_SPEC) -> float:
    """``int_0^inf k^3 exp(-k x) K_n(k) dk`` for a single regulator value.

    ``|I_n|`` decreases monotonically in x for ``x >= 2 r`` with
    ``r = sqrt(d^2 + rho^2)``; below that I1 can change sign at large rho/d.
    """
    if not x > 0:
        raise ValueError("regulator x must be > 0")
    idx = KernelId(kernel).index
    r = math.hypot(d, rho)
    k_max = _k_cutoff(x, spec, r**-4)

    def f(k):
        kv, _ = angular_kernels(k, d, rho)
        return k**3 * np.exp(-k * x) * kv[:, idx]

    res = integrate(f, 0.0, k_max, spec, initial_panels=int(k_max * r / 4.0) + 1)
    if not res.converged:
        raise ConvergenceError(f"{KernelId(kernel).value} did not converge at x={x}", res)
    return float(res.value)


class _KernelTable:
    """Kernel values on GK21 k-panels, shared by every regulator value x.

    ``transform(x)`` returns the Kronrod estimates of I_n(x) and the summed
    |Kronrod - Gauss| differences as error bounds.
    """

    def __init__(self, d: float, rho: float, k_max: float, spec: QuadratureSpec,
                 theta_spec: QuadratureSpec = THETA_SPEC, max_panels: int = 6000):
        self.d, self.rho = d, rho
        self.theta_spec = theta_spec
        self.spec = spec
        self.max_panels = max_panels
        r = math.hypot(d, rho)
        h = 2.0 / r
        graded = h * 2.0 ** np.arange(-18, 0)
        uniform = np.arange(h, k_max + h, h)
        edges = np.concatenate([[0.0], graded, uniform])
        self.lo = edges[:-1]
        self.hi = edges[1:]
        self.nodes, self.wk, self.wg = GK21.scaled(self.lo, self.hi)
        self.kernels = self._kernels(self.nodes)
        self.theta_evaluations = 0

    def _kernels(self, nodes: np.ndarray) -> np.ndarray:
        out = np.empty(nodes.shape + (4,))
        # neighbouring panels share a theta resolution, so batch a few at once
        batch = 8
        for i in range(0, nodes.shape[0], batch):
            block = nodes[i:i + batch].reshape(-1)
            vals, _ = angular_kernels(block, self.d, self.rho, self.theta_spec)
            out[i:i + batch] = vals.reshape(nodes[i:i + batch].shape + (4,))
        return out

    def _weights(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # (nx, p, 21) Laplace weights for Kronrod and Kronrod-minus-Gauss
        k = self.nodes[None, :, :]
        base = k**3 * np.exp(-x[:, None, None] * k)
        return base * self.wk[None], base * (self.wk - self.wg)[None]

    def transform(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, float))
        wk, wd = self._weights(x)
        values = np.einsum("xpn,pnc->xc", wk, self.kernels)
        errors = np.abs(np.einsum("xpn,pnc->xpc", wd, self.kernels)).sum(axis=1)
        return values, errors

    def refine(self, probes: np.ndarray) -> bool:
        """Bisect k-panels until every probe x meets the tolerance."""
        while True:
            wk, wd = self._weights(probes)
            values = np.einsum("xpn,pnc->xc", wk, self.kernels)
            panel_err = np.abs(np.einsum("xpn,pnc->xpc", wd, self.kernels))
            # components can vanish identically (I3, I4 on the axis); measure
            # against the largest magnitude seen for that x
            scale = np.abs(values).max(axis=1, keepdims=True)
            tol = np.maximum(self.spec.rel_tol * np.abs(values),
                             1e-3 * self.spec.rel_tol * scale)
            tol = np.maximum(tol, self.spec.abs_tol * 1e-3)
            if np.all(panel_err.sum(axis=1) <= tol):
                return True
            if self.lo.size >= self.max_panels:
                return False
            norm = (panel_err / tol[:, None, :]).max(axis=(0, 2))
            order = np.argsort(norm)[::-1]
            cum = np.cumsum(norm[order])
            pick = order[: int(np.searchsorted(cum, 0.5 * cum[-1]) + 1)]
            keep = np.ones(self.lo.size, bool)
            keep[pick] = False
            mid = 0.5 * (self.lo[pick] + self.hi[pick])
            new_lo = np.concatenate([self.lo[pick], mid])
            new_hi = np.concatenate([mid, self.hi[pick]])
            nodes, wk_new, wg_new = GK21.scaled(new_lo, new_hi)
            kern = self._kernels(nodes)
            self.lo = np.concatenate([self.lo[keep], new_lo])
            self.hi = np.concatenate([self.hi[keep], new_hi])
            self.nodes = np.concatenate([self.nodes[keep], nodes])
            self.wk = np.concatenate([self.wk[keep], wk_new])
            self.wg = np.concatenate([self.wg[keep], wg_new])
            self.kernels = np.concatenate([self.kernels[keep], kern])

    @property
    def k_nodes(self) -> int:
        return self.nodes.size


@dataclass(frozen=True)
class IntegralBreakdown:
    """Per-kernel share of the reduced density.

    ``contributions`` maps ``I1..I4`` to ``(d^7/pi) int c_n I_n^2 dx`` with
    ``c = (1, 2, 1, 1)``; ``total`` is their sum.
    """

    u: float
    contributions: dict[str, float]
    errors: dict[str, float]
    total: float
    error_estimate: float
    diagnostics: dict[str, float] = field(default_factory=dict, compare=False)


def _floor_piece(g, x_lo: float, x_f: float):
    """Integral of g over [x_lo, x_f] from a polynomial fitted above x_f."""
    t = 0.5 * (1.0 - np.cos(np.linspace(0.0, math.pi, _FLOOR_NODES)))
    nodes = x_f * (1.0 + _FLOOR_SPAN * t)
    vals = g(nodes)
    estimates = []
    for deg in _FLOOR_DEGREES:
        # fit in a centred variable so the Vandermonde stays well conditioned
        centre, half = x_f * (1 + 0.5 * _FLOOR_SPAN), 0.5 * _FLOOR_SPAN * x_f
        coef = np.polynomial.polynomial.polyfit((nodes - centre) / half, vals, deg)
        anti = np.polynomial.polynomial.polyint(coef)
        a, b = (x_lo - centre) / half, (x_f - centre) / half
        pa = np.polynomial.polynomial.polyval(a, anti)
        pb = np.polynomial.polynomial.polyval(b, anti)
        estimates.append(half * (pb - pa))
    return estimates[0], np.abs(estimates[0] - estimates[1])


def density_integral(d: float, rho: float, spec: QuadratureSpec = CROSS_PATH_SPEC, *,
                     x_floor: float = 0.08, x_lower: float = 0.0) -> IntegralBreakdown:
    """Reduced density at (d, rho) from the nested integral representation.

    ``x_lower > 0`` starts the x-integral there, which is the continuum
    counterpart of an ``exp(-(k + k')/k_c)`` mode cutoff with
    ``x_lower = 1/k_c``.
    """
    if not (d > 0 and rho >= 0 and math.isfinite(rho)):
        raise ValueError("need d > 0 and finite rho >= 0")
    if x_lower < 0 or x_floor <= 0:
        raise ValueError("x_lower must be >= 0 and x_floor > 0")
    r = math.hypot(d, rho)
    # work with lengths in units of r, so tolerances are scale free
    d1, rho1, x_low1 = d / r, rho / r, x_lower / r
    x_f = max(x_floor, x_low1)

    k_max = _k_cutoff(x_f, spec)
    table = _KernelTable(d1, rho1, k_max, spec.replace(rel_tol=0.1 * spec.rel_tol))
    probes = np.concatenate([
        x_f * (1.0 + _FLOOR_SPAN * np.linspace(0.0, 1.0, 7)),
        np.geomspace(x_f, 2000.0, 40),
    ])
    if not table.refine(probes):
        raise ConvergenceError("k-panel budget exhausted")

    def g(x):
        vals, errs = table.transform(x)
        sq = WEIGHTS * vals**2
        prop = (2.0 * WEIGHTS * np.abs(vals) * errs).sum(axis=1, keepdims=True)
        return np.concatenate([sq, prop], axis=1)

    g_f = float(g(np.array([x_f]))[0, :4].sum())
    x_spec = QuadratureSpec(
        rel_tol=spec.rel_tol,
        abs_tol=max(spec.abs_tol, 1e-3 * spec.rel_tol * g_f),
        max_subdivisions=spec.max_subdivisions,
        semi_infinite_policy=IntervalDoubling(0.1, initial_width=0.25),
    )
    res = integrate(g, x_f, math.inf, x_spec)
    if not res.converged:
        raise ConvergenceError("x-integral did not converge", res)
    body = np.asarray(res.value)
    body_err = np.asarray(res.error_estimate)

    floor_val = np.zeros(5)
    floor_err = np.zeros(5)
    if x_low1 < x_f:
        floor_val, floor_err = _floor_piece(g, x_low1, x_f)

    norm = d1**7 / math.pi
    parts = norm * (body[:4] + floor_val[:4])
    part_err = norm * (body_err[:4] + floor_err[:4] + body[4] + floor_val[4])
    names = [k.value for k in KernelId]
    total = float(parts.sum())
    return IntegralBreakdown(
        u=rho / d,
        contributions=dict(zip(names, map(float, parts))),
        errors=dict(zip(names, map(float, part_err))),
        total=total,
        error_estimate=float(part_err.sum()),
        diagnostics={
            "k_max": k_max / r,
            "k_nodes": float(table.k_nodes),
            "x_floor": x_f * r,
            "floor_share": float(norm * floor_val[:4].sum() / total) if total else 0.0,
            "x_evaluations": float(res.evaluations),
        },
    )


def sigma_quad(u: float, spec: QuadratureSpec = CROSS_PATH_SPEC, *,
               x_floor: float = 0.08, x_lower: float = 0.0) -> IntegralBreakdown:
    """Reduced density at ``u = rho/d`` by nested quadrature."""
    if not (math.isfinite(u) and u >= 0):
        raise ValueError("u must be finite and >= 0")
    return density_integral(1.0, u, spec, x_floor=x_floor, x_lower=x_lower)


@dataclass(frozen=True)
class IntegratedForce:
    """``2 pi int u sigma(u) du`` from a sampled profile plus an asymptotic tail."""

    value: float
    tail: float
    error_estimate: float
    u_nodes: tuple[float, ...]
    sigma_values: tuple[float, ...]


def integrated_force(u_max: float = 20.0, spec: QuadratureSpec = CROSS_PATH_SPEC, *,
                     rule: str = "gauss", density=None, mapper=map) -> IntegratedForce:
    """Reduced wall force by integrating a profile over ``u <= u_max``.

    The profile is sampled on one Gauss (10 nodes) or Kronrod (21 nodes)
    rule in ``phi`` with ``u = tan(phi)``; beyond ``u_max`` the far-field
    form ``10/u^7`` supplies the tail ``4 pi / u_max^5``. ``density``
    defaults to :func:`sigma_quad` totals; ``mapper`` may be a parallel map.
    """
    if rule not in ("gauss", "kronrod"):
        raise ValueError("rule must be 'gauss' or 'kronrod'")
    if not u_max > 0:
        raise ValueError("u_max must be > 0")
    nodes, wk, wg = GK21.scaled(0.0, math.atan(u_max))
    nodes, wk, wg = nodes[0], wk[0], wg[0]
    use = np.nonzero(wg)[0] if rule == "gauss" else np.arange(21)
    u = np.tan(nodes[use])
    if density is None:
        results = list(mapper(_sigma_quad_pair, [(float(v), spec) for v in u]))
        sig = np.array([r[0] for r in results])
        node_err = np.array([r[1] for r in results])
    else:
        sig = np.array([float(density(float(v))) for v in u])
        node_err = np.zeros_like(sig)
    jac = 2.0 * math.pi * u / np.cos(nodes[use]) ** 2
    tail = 4.0 * math.pi / u_max**5
    if rule == "gauss":
        value = float(np.sum(wg[use] * jac * sig))
        err = float(np.sum(wg[use] * jac * node_err))
    else:
        value = float(np.sum(wk * jac * sig))
        rule_err = abs(value - float(np.sum(wg * jac * sig)))
        err = rule_err + float(np.sum(wk * jac * node_err))
    return IntegratedForce(value + tail, tail, err, tuple(map(float, u)), tuple(map(float, sig)))


def _sigma_quad_pair(args) -> tuple[float, float]:
    # module-level so process pools can pickle it
    u, spec = args
    b = sigma_quad(u, spec)
    return b.total, b.error_estimate
