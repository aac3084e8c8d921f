"""Discrete cavity-mode evaluation of the wall force density.

The conducting plate sits at ``z = L``; the right-hand cavity is
``|x|, |y| < L1/2``, ``L < z < L1`` with volume ``V = L1^2 (L1 - L)``, and
the atom is at ``r_A = (0, 0, L + d)``. At first order in alpha,

    sigma(x, y) = (8 pi hbar c / V^2) sum_{k k' j j'} alpha sqrt(k k')/(k + k')
                  f(kj, r_A) . f(k'j', r_A) [A(kj) A(k'j') + B(kj, k'j')],

summed here with a smooth weight ``exp(-(k + k')/k_c)``. That weight is
equivalent to starting the continuum x-integral at ``1/k_c``, which gives a
bias-matched reference (:func:`cutoff_reference`).

Mode functions carry the normalisation ``sqrt(8 / 2^z)`` with ``z`` the
number of vanishing wavevector components, so that ``(1/V) int |f|^2 = 1``
for every mode; for modes with all components nonzero this is the familiar
``sqrt(8)``. The stress coefficients are scaled consistently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .closedform import sigma_hat
from .specfun import QuadratureSpec, integrate
from .units import DEFAULT_CONSTANTS, Constants, PhysicalSetup

__all__ = [
    "ModeBox",
    "Mode",
    "ModeSet",
    "CutoffUnderflowWarning",
    "ModeBudgetExceeded",
    "enumerate_modes",
    "polarization_basis",
    "transverse_projector",
    "mode_function",
    "stress_coeff_A",
    "stress_coeff_B",
    "dressed_amplitude",
    "bare_vacuum_contribution",
    "default_cutoff",
    "sigma_modesum",
    "sigma_modesum_direct",
    "cutoff_reference",
    "ScheduleStep",
    "ConvergenceRow",
    "DEFAULT_SCHEDULE",
    "MAX_MODES",
    "convergence_study",
]

#: desk-scale ceiling on the number of modes (pair cost grows as M^2)
MAX_MODES = 60_000

_BLOCK = 512


class CutoffUnderflowWarning(UserWarning):
    """The mode grid is too coarse to resolve the atom-wall distance."""


class ModeBudgetExceeded(RuntimeError):
    """Requested box would exceed the mode budget."""


@dataclass(frozen=True)
class ModeBox:
    """Right-hand cavity: plate at ``z = L``, outer walls at ``|x|,|y| = L1/2`` and ``z = L1``."""

    L: float
    L1: float
    n_max: int

    def __post_init__(self):
        if not (math.isfinite(self.L) and math.isfinite(self.L1) and self.L1 > self.L > 0):
            raise ValueError("need L1 > L > 0")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError("n_max must be an integer >= 1")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def Lz(self) -> float:
        return self.L1 - self.L

    @property
    def V(self) -> float:
        return self.L1**2 * (self.L1 - self.L)

    @property
    def mode_count(self) -> int:
        """Number of (k, j) modes kept by :func:`enumerate_modes`."""
        n = self.n_max
        # all-nonzero triples carry two polarisations, one-zero triples one
        return 2 * n**3 + 3 * n**2

    def inside(self, r) -> bool:
        x, y, z = (float(c) for c in r)
        h = 0.5 * self.L1
        return -h <= x <= h and -h <= y <= h and self.L <= z <= self.L1

    @classmethod
    def for_distance(cls, d: float, L1_over_d: float, Lz_over_d: float, n_max: int) -> "ModeBox":
        """Box with plate-to-back-wall depth ``Lz`` and width ``L1``, both in units of d."""
        L1 = L1_over_d * d
        return cls(L1 - Lz_over_d * d, L1, n_max)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def polarization_basis(kvec) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal polarisation pair for ``kvec`` (or an (M, 3) stack).

    ``e1 = k_hat x a`` with ``a`` the coordinate axis least aligned with
    k, normalised; ``e2 = k_hat x e1``.
    """
    k = np.asarray(kvec, float)
    single = k.ndim == 1
    k = np.atleast_2d(k)
    norms = np.linalg.norm(k, axis=1)
    if np.any(norms == 0):
        raise ValueError("polarisation basis needs a nonzero wavevector")
    kh = k / norms[:, None]
    axis = np.eye(3)[np.argmin(np.abs(kh), axis=1)]
    e1 = _unit(np.cross(kh, axis))
    e2 = np.cross(kh, e1)
    return (e1[0], e2[0]) if single else (e1, e2)


def transverse_projector(kvec) -> np.ndarray:
    """``delta_ab - k_a k_b / k^2``."""
    k = np.asarray(kvec, float)
    if k.shape != (3,):
        raise ValueError("kvec must be a 3-vector")
    kk = float(k @ k)
    if kk == 0:
        raise ValueError("transverse projector undefined for k = 0")
    return np.eye(3) - np.outer(k, k) / kk


def _normalization(kvec: np.ndarray) -> np.ndarray:
    zeros = np.sum(np.asarray(kvec) == 0, axis=-1)
    return np.sqrt(8.0 / 2.0**zeros)


@dataclass(frozen=True)
class Mode:
    """One cavity mode: wavevector, polarisation index (1 or 2) and unit vector."""

    kvec: tuple[float, float, float]
    pol: int
    evec: tuple[float, float, float]

    def __post_init__(self):
        k = np.asarray(self.kvec, float)
        e = np.asarray(self.evec, float)
        if k.shape != (3,) or e.shape != (3,):
            raise ValueError("kvec and evec must be 3-vectors")
        if self.pol not in (1, 2):
            raise ValueError("polarisation index must be 1 or 2")
        if not np.any(k):
            raise ValueError("zero wavevector has no mode")
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("polarisation vector must be a unit vector")
        if abs(e @ k) > 1e-12 * np.linalg.norm(k):
            raise ValueError("polarisation vector must be transverse to k")

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.kvec))

    @property
    def normalization(self) -> float:
        return float(_normalization(np.asarray(self.kvec)))


@dataclass(frozen=True)
class ModeSet:
    """All kept modes of a box as parallel arrays; iteration yields :class:`Mode`."""

    box: ModeBox
    kvec: np.ndarray = field(repr=False)
    evec: np.ndarray = field(repr=False)
    pol: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.kvec.shape[0]

    def __iter__(self) -> Iterator[Mode]:
        for kv, ev, j in zip(self.kvec, self.evec, self.pol):
            yield Mode(tuple(kv), int(j), tuple(ev))

    @property
    def k(self) -> np.ndarray:
        return np.linalg.norm(self.kvec, axis=1)

    @property
    def normalization(self) -> np.ndarray:
        return _normalization(self.kvec)


def enumerate_modes(box: ModeBox) -> ModeSet:
    """Modes with ``l, m, n <= n_max`` and at least two nonzero indices.

    Wavevectors with one zero index keep only the polarisation whose field
    is not identically zero. Order is fixed: polarisation 1 modes, then
    polarisation 2, each in lexicographic (l, m, n) order.
    """
    idx = np.arange(box.n_max + 1)
    l, m, n = (a.ravel() for a in np.meshgrid(idx, idx, idx, indexing="ij"))
    keep = (l > 0).astype(int) + (m > 0) + (n > 0) >= 2
    l, m, n = l[keep], m[keep], n[keep]
    kvec = np.stack([l * math.pi / box.L1, m * math.pi / box.L1, n * math.pi / box.Lz], axis=1)
    e1, e2 = polarization_basis(kvec)
    # With a zero index the least-aligned axis is that index's axis, and e1
    # has exactly no component along it; every field component then carries
    # a vanishing sine, so that polarisation is dropped as well.
    has_zero = np.any(kvec == 0, axis=1)
    kv = np.concatenate([kvec[~has_zero], kvec])
    ev = np.concatenate([e1[~has_zero], e2])
    pol = np.concatenate([np.ones(int(np.sum(~has_zero)), int), np.full(kvec.shape[0], 2)])
    # exact transversality by construction; assert to catch regressions
    assert np.all(np.abs(np.einsum("ij,ij->i", ev, kv)) <= 1e-12 * np.linalg.norm(kv, axis=1))
    ms = ModeSet(box, kv, ev, pol)
    for a in (ms.kvec, ms.evec, ms.pol):
        a.setflags(write=False)
    return ms


def _mode_fields(kvec: np.ndarray, evec: np.ndarray, r, box: ModeBox) -> np.ndarray:
    x, y, z = r
    h = 0.5 * box.L1
    px, py, pz = kvec[:, 0] * (x + h), kvec[:, 1] * (y + h), kvec[:, 2] * (z - box.L)
    sx, cx, sy, cy, sz, cz = np.sin(px), np.cos(px), np.sin(py), np.cos(py), np.sin(pz), np.cos(pz)
    f = np.stack([evec[:, 0] * cx * sy * sz, evec[:, 1] * sx * cy * sz, evec[:, 2] * sx * sy * cz], 1)
    return _normalization(kvec)[:, None] * f


def mode_function(mode: Mode, r, box: ModeBox) -> np.ndarray:
    """``(f_x, f_y, f_z)`` of ``mode`` at ``r`` (cos/sin products of the cavity)."""
    if not box.inside(r):
        raise ValueError(f"point {tuple(r)} lies outside the cavity")
    return _mode_fields(np.atleast_2d(mode.kvec), np.atleast_2d(mode.evec), tuple(map(float, r)), box)[0]


def _wall_coefficients(kvec: np.ndarray, evec: np.ndarray, x: float, y: float, box: ModeBox):
    """A and the two B factors for every mode, shape (M, 3)."""
    h = 0.5 * box.L1
    k = np.linalg.norm(kvec, axis=1)
    px, py = kvec[:, 0] * (x + h), kvec[:, 1] * (y + h)
    sx, cx, sy, cy = np.sin(px), np.cos(px), np.sin(py), np.cos(py)
    rk = np.sqrt(k)
    ex, ey, ez = evec[:, 0], evec[:, 1], evec[:, 2]
    a = rk * ez * sx * sy
    bx = (ez * kvec[:, 0] - ex * kvec[:, 2]) * cx * sy / rk
    by = (ez * kvec[:, 1] - ey * kvec[:, 2]) * sx * cy / rk
    scale = _normalization(kvec) / math.sqrt(8.0)
    return scale[:, None] * np.stack([a, bx, by], 1)


def stress_coeff_A(mode: Mode, x: float, y: float, box: ModeBox) -> float:
    """``sqrt(k) e_z sin[k_x (x + L1/2)] sin[k_y (y + L1/2)]``."""
    return float(_wall_coefficients(np.atleast_2d(mode.kvec), np.atleast_2d(mode.evec), x, y, box)[0, 0])


def stress_coeff_B(mode: Mode, other: Mode, x: float, y: float, box: ModeBox) -> float:
    """Two-term magnetic coefficient ``B(kj, k'j')`` with its ``1/sqrt(k k')``."""
    g = _wall_coefficients(np.array([mode.kvec, other.kvec], float),
                           np.array([mode.evec, other.evec], float), x, y, box)
    return float(g[0, 1] * g[1, 1] + g[0, 2] * g[1, 2])


def _atom_position(setup: PhysicalSetup, box: ModeBox) -> tuple[float, float, float]:
    D = box.L + setup.d
    if not D < box.L1:
        raise ValueError("atom lies outside the cavity (need L + d < L1)")
    return (0.0, 0.0, D)


def dressed_amplitude(mode: Mode, other: Mode, setup: PhysicalSetup, box: ModeBox) -> float:
    """First-order two-photon amplitude ``-(pi/V) alpha sqrt(k k')/(k + k') f.f'`` at the atom."""
    rA = _atom_position(setup, box)
    f = _mode_fields(np.array([mode.kvec, other.kvec], float),
                     np.array([mode.evec, other.evec], float), rA, box)
    k, kp = mode.k, other.k
    return -(math.pi / box.V) * setup.alpha * math.sqrt(k * kp) / (k + kp) * float(f[0] @ f[1])


def bare_vacuum_contribution(order: int = 1) -> float:
    """Bare-vacuum term of the density difference at the given order in alpha.

    Both sides of the difference share ``<0|S|0>``, so at first order it
    cancels identically; higher orders are outside this model.
    """
    if order != 1:
        raise NotImplementedError("only the first-order density is modelled")
    return 0.0


def default_cutoff(box: ModeBox) -> float:
    """Frequency cutoff ``k_c = k_max / 8`` with ``k_max = n_max pi / (L1 - L)``."""
    return box.n_max * math.pi / (8.0 * box.Lz)


def _check_resolution(box: ModeBox, d: float) -> None:
    if box.n_max * math.pi / box.Lz < 10.0 / d:
        warnings.warn(
            f"n_max*pi/(L1-L) = {box.n_max * math.pi / box.Lz:.3g} < 10/d = {10.0 / d:.3g}; "
            "the mode grid under-resolves the atom distance",
            CutoffUnderflowWarning,
            stacklevel=3,
        )


def _pair_sum(modes: ModeSet, x: float, y: float, rA, k_c: float) -> float:
    """``sum_{ij} w_ij (f_i.f_j)(A_i A_j + B_ij)`` with the cutoff weight folded in."""
    box = modes.box
    f = _mode_fields(modes.kvec, modes.evec, rA, box)  # (M, 3)
    g = _wall_coefficients(modes.kvec, modes.evec, x, y, box)  # (M, 3)
    # (f.f')(g.g') = H_i . H_j with H = f (x) g flattened
    H = (f[:, :, None] * g[:, None, :]).reshape(len(modes), 9)
    k = modes.k
    s = np.sqrt(k) * np.exp(-k / k_c)
    partials = []
    for i in range(0, k.size, _BLOCK):
        sl = slice(i, i + _BLOCK)
        w = s[sl, None] * s[None, :] / (k[sl, None] + k[None, :])
        partials.append(float(np.sum(H[sl] * (w @ H))))
    return math.fsum(partials)


def sigma_modesum(x: float, y: float, box: ModeBox, setup: PhysicalSetup,
                  k_c: float | None = None, *, reduced: bool = True,
                  constants: Constants = DEFAULT_CONSTANTS, max_modes: int = MAX_MODES) -> float:
    """Force density at plate point ``(x, y, L)`` from the cutoff-weighted mode sum.

    With ``reduced=True`` the result is in units of ``hbar c alpha/(4 pi^2 d^7)``
    (directly comparable with ``sigma_hat``); otherwise it is the physical
    density in the setup's unit system, exactly linear in alpha.
    Lengths ``x, y`` and the box are in the same units as ``setup.d``.
    """
    if box.mode_count > max_modes:
        raise ModeBudgetExceeded(f"{box.mode_count} modes exceeds the budget of {max_modes}")
    if not (abs(x) <= box.L1 / 2 and abs(y) <= box.L1 / 2):
        raise ValueError("plate point outside the cavity face")
    _check_resolution(box, setup.d)
    k_c = default_cutoff(box) if k_c is None else float(k_c)
    if not k_c > 0:
        raise ValueError("k_c must be > 0")
    rA = _atom_position(setup, box)
    assert bare_vacuum_contribution(1) == 0.0
    total = _pair_sum(enumerate_modes(box), float(x), float(y), rA, k_c)
    base = 8.0 * math.pi / box.V**2 * total
    if reduced:
        return base * 4.0 * math.pi**2 * setup.d**7
    hc = constants.hbar_c_in(setup.unit_system)
    return hc * base * setup.alpha


def sigma_modesum_direct(x: float, y: float, box: ModeBox, setup: PhysicalSetup,
                         k_c: float | None = None, *, max_modes: int = 4000) -> float:
    """Physical density from explicit dressed amplitudes, ``-(8 hbar c/V) sum c (A A' + B)``.

    A literal O(M^2)-memory route for small boxes, used to cross-check
    :func:`sigma_modesum`; natural units only (hbar c = 1).
    """
    if box.mode_count > max_modes:
        raise ModeBudgetExceeded(f"direct route limited to {max_modes} modes")
    k_c = default_cutoff(box) if k_c is None else float(k_c)
    modes = enumerate_modes(box)
    rA = _atom_position(setup, box)
    f = _mode_fields(modes.kvec, modes.evec, rA, box)
    k = modes.k
    amp = -(math.pi / box.V) * setup.alpha * np.sqrt(np.outer(k, k)) / np.add.outer(k, k) * (f @ f.T)
    g = _wall_coefficients(modes.kvec, modes.evec, x, y, box)
    a = np.outer(g[:, 0], g[:, 0])
    b = np.outer(g[:, 1], g[:, 1]) + np.outer(g[:, 2], g[:, 2])
    cut = np.exp(-np.add.outer(k, k) / k_c)
    return -(8.0 / box.V) * float(np.sum(cut * amp * (a + b)))


def _axis_integrand(x):
    t = 1.0 + x * x
    return 64.0 / t**4 + 512.0 * x * x / t**6


def cutoff_reference(u: float, k_c_d: float) -> float:
    """Continuum density with the regulator integral started at ``x = 1/k_c``.

    This is the limit the weighted mode sum approaches at fixed ``k_c``.
    On the axis (u = 0) the integrand is elementary; elsewhere the nested
    quadrature path is used.
    """
    if not k_c_d > 0:
        raise ValueError("k_c must be > 0")
    if u == 0:
        res = integrate(_axis_integrand, 1.0 / k_c_d, math.inf, QuadratureSpec(rel_tol=1e-12))
        return float(res.value) / math.pi
    from .quadpath import sigma_quad

    return sigma_quad(u, x_lower=1.0 / k_c_d).total


@dataclass(frozen=True)
class ScheduleStep:
    """One point of a convergence schedule; lengths in units of d."""

    n_max: int
    L1_over_d: float
    Lz_over_d: float
    k_c_d: float | None = None

    def box(self, d: float = 1.0) -> ModeBox:
        return ModeBox.for_distance(d, self.L1_over_d, self.Lz_over_d, self.n_max)

    def cutoff(self, d: float = 1.0) -> float:
        return default_cutoff(self.box(d)) if self.k_c_d is None else self.k_c_d / d


#: growing box and cutoff together, k_c = k_max / 8 at each step
DEFAULT_SCHEDULE: tuple[ScheduleStep, ...] = (
    ScheduleStep(12, 4.0, 3.6),
    ScheduleStep(16, 4.4, 4.0),
    ScheduleStep(20, 4.8, 4.4),
    ScheduleStep(24, 5.2, 4.8),
)


@dataclass(frozen=True)
class ConvergenceRow:
    n_max: int
    L1_over_d: float
    Lz_over_d: float
    k_c_d: float
    modes: int
    sigma_hat: float
    deviation: float
    reference: float
    reference_deviation: float


def convergence_study(schedule: Sequence[ScheduleStep] = DEFAULT_SCHEDULE, u: float = 0.0,
                      max_modes: int = MAX_MODES, with_reference: bool = True) -> Iterable[ConvergenceRow]:
    """Yield one row per schedule step, evaluated at plate point ``(u d, 0)``.

    ``deviation`` is relative to the closed form and ``reference_deviation``
    to :func:`cutoff_reference` (NaN when ``with_reference`` is False).
    Raises :class:`ModeBudgetExceeded` before evaluating an oversized step.
    """
    setup = PhysicalSetup(1.0, 1.0)
    exact = sigma_hat(u)
    for step in schedule:
        box = step.box()
        kc = step.cutoff()
        value = sigma_modesum(u, 0.0, box, setup, kc, max_modes=max_modes)
        ref = cutoff_reference(u, kc) if with_reference else math.nan
        yield ConvergenceRow(step.n_max, step.L1_over_d, step.Lz_over_d, kc, box.mode_count,
                             value, (value - exact) / exact, ref, (value - ref) / ref)
