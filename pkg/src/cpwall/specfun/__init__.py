"""Special functions and the quadrature engine used by every numerical path."""

from .bessel import bessel_j0, bessel_j0_j1, bessel_j1
from .quadrature import (
    GK21,
    ConvergenceError,
    ExponentialTruncation,
    IntervalDoubling,
    QuadratureResult,
    QuadratureSpec,
    exponential_cutoff,
    gauss_kronrod,
    integrate,
)

__all__ = [
    "bessel_j0",
    "bessel_j1",
    "bessel_j0_j1",
    "GK21",
    "ConvergenceError",
    "ExponentialTruncation",
    "IntervalDoubling",
    "QuadratureResult",
    "QuadratureSpec",
    "exponential_cutoff",
    "gauss_kronrod",
    "integrate",
]
