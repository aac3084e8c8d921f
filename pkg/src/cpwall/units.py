"""Constants, unit systems and flat ``key = value`` configuration files.

Everything downstream works in reduced variables: in-plane distance
``u = rho / d`` and densities in units of ``hbar c alpha / (4 pi^2 d^7)``.
This module owns the conversion at the boundary.

Polarizabilities are polarizability volumes (Gaussian convention, length^3),
so in SI the density comes out in pascal when ``alpha`` is in m^3 and ``d``
in metres.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

__all__ = [
    "UnitSystem",
    "Constants",
    "DEFAULT_CONSTANTS",
    "PhysicalSetup",
    "PolarizabilityModel",
    "ConfigError",
    "read_config",
    "load_constants",
    "to_reduced",
    "density_scale",
    "density_to_physical",
    "CONSTANTS_ENV",
]

# CODATA 2018 exact/recommended values
HBAR_SI = 1.054_571_817e-34  # J s
C_SI = 299_792_458.0  # m / s
HBAR_C_SI = HBAR_SI * C_SI  # J m

CONSTANTS_ENV = "CPWALL_CONSTANTS"


class ConfigError(ValueError):
    """Malformed configuration file or invalid physical input."""


class UnitSystem(str, Enum):
    NATURAL = "natural"
    SI = "SI"

    @classmethod
    def parse(cls, text: str) -> "UnitSystem":
        for member in cls:
            if text.strip().lower() == member.value.lower():
                return member
        raise ConfigError(f"unknown unit system {text!r} (expected natural or SI)")


@dataclass(frozen=True)
class Constants:
    """SI values of hbar*c (J m) and c (m/s)."""

    hbar_c: float = HBAR_C_SI
    c: float = C_SI

    def __post_init__(self):
        for name in ("hbar_c", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"constant {name} must be finite and > 0, got {v!r}")

    def hbar_c_in(self, units: UnitSystem) -> float:
        return 1.0 if units is UnitSystem.NATURAL else self.hbar_c


DEFAULT_CONSTANTS = Constants()


@dataclass(frozen=True)
class PhysicalSetup:
    """Static polarizability ``alpha`` (length^3) and atom-wall distance ``d``."""

    alpha: float
    d: float
    unit_system: UnitSystem = UnitSystem.NATURAL

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be finite and > 0, got {self.alpha!r}")
        if not (math.isfinite(self.d) and self.d > 0):
            raise ConfigError(f"distance d must be finite and > 0, got {self.d!r}")
        if not isinstance(self.unit_system, UnitSystem):
            object.__setattr__(self, "unit_system", UnitSystem.parse(str(self.unit_system)))


@dataclass(frozen=True)
class PolarizabilityModel:
    """Atomic polarizability, optionally wavenumber dependent.

    Without a ``profile`` the model is the constant far-zone value.
    """

    static_value: float
    profile: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.static_value) and self.static_value > 0):
            raise ConfigError("static polarizability must be finite and > 0")
        if self.profile is not None:
            at_zero = float(self.profile(0.0))
            if not math.isclose(at_zero, self.static_value, rel_tol=1e-12, abs_tol=0.0):
                raise ConfigError(
                    f"dynamic profile gives {at_zero!r} at k=0, "
                    f"expected the static value {self.static_value!r}"
                )

    def __call__(self, k: float) -> float:
        if self.profile is None:
            return self.static_value
        return float(self.profile(k))

    def far_zone(self) -> "PolarizabilityModel":
        return PolarizabilityModel(self.static_value)


def read_config(path: str | os.PathLike, allowed: set[str] | frozenset[str]) -> dict[str, str]:
    """Parse a flat ``key = value`` file.

    Blank lines and ``#`` comments are skipped. Unknown or repeated keys
    raise :class:`ConfigError`; values are returned as stripped strings.
    """
    out: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_constants(path: str | os.PathLike | None = None) -> Constants:
    """Constants from ``path``, else from ``$CPWALL_CONSTANTS``, else defaults."""
    if path is None:
        path = os.environ.get(CONSTANTS_ENV) or None
    if path is None:
        return DEFAULT_CONSTANTS
    raw = read_config(path, {"hbar_c", "c"})
    try:
        values = {k: float(v) for k, v in raw.items()}
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return Constants(**values)


def to_reduced(setup: PhysicalSetup, rho: float) -> float:
    """In-plane distance in units of the atom-wall distance."""
    if not (math.isfinite(rho) and rho >= 0):
        raise ValueError(f"rho must be finite and >= 0, got {rho!r}")
    return rho / setup.d


def density_scale(setup: PhysicalSetup, constants: Constants = DEFAULT_CONSTANTS) -> float:
    """``hbar c alpha / (4 pi^2 d^7)`` in the setup's unit system."""
    hc = constants.hbar_c_in(setup.unit_system)
    return hc * setup.alpha / (4.0 * math.pi**2 * setup.d**7)


def density_to_physical(
    sigma_hat: float, setup: PhysicalSetup, constants: Constants = DEFAULT_CONSTANTS
) -> float:
    if not math.isfinite(sigma_hat):
        raise ValueError("sigma_hat must be finite")
    return density_scale(setup, constants) * sigma_hat
