"""
Elliptic Integral Kernel
========================

Complete elliptic integrals of the first and second kind, the combination
psi(k) = (1 - k^2/2) K(k) - E(k) that drives the vector potential of a
circular current loop, and a 2-D adaptive quadrature used by the Neumann
reference integral.

Two conventions are exposed:
- STANDARD: integration over [0, pi/2], so K(0) = E(0) = pi/2.
- DOUBLED: integration over [0, pi], every value exactly twice STANDARD,
  so K(0) = pi and E(1) = 2. This is the default for the public
  elliptic_K / elliptic_E / psi helpers because the coil kernel formulas
  in the link model are written against it.

Inductance code asks for the convention explicitly; the physically correct
mutual inductance comes from STANDARD (see inductance.py).
"""

from enum import Enum
from typing import Callable, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from . import config
from .errors import EllipticDomainError, QuadratureError

ArrayLike = Union[float, np.ndarray]


class EllipticConvention(Enum):
    """Integration range convention of the complete elliptic integrals."""
    STANDARD = 'standard'
    DOUBLED = 'doubled'

    @property
    def scale(self) -> float:
        return 1.0 if self is EllipticConvention.STANDARD else 2.0

    @property
    def upper_limit(self) -> float:
        return self.scale * np.pi / 2

    @classmethod
    def parse(cls, value: Union[str, 'EllipticConvention']) -> 'EllipticConvention':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise EllipticDomainError(
                f"unknown elliptic convention {value!r}; expected 'standard' or 'doubled'"
            ) from None


def _as_modulus(xi: ArrayLike, allow_one: bool) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if np.any(~np.isfinite(xi)) or np.any(xi < 0):
        raise EllipticDomainError(f"modulus must be finite and >= 0, got {xi!r}")
    if allow_one:
        if np.any(xi > 1.0):
            raise EllipticDomainError(f"modulus {float(np.max(xi))!r} exceeds 1")
    elif np.any(xi >= 1.0 - config.SINGULAR_MODULUS_GUARD):
        raise EllipticDomainError(
            f"modulus {float(np.max(xi))!r} at or above the logarithmic singularity at 1"
        )
    return xi


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def elliptic_K(xi: ArrayLike, convention: EllipticConvention = EllipticConvention.DOUBLED) -> ArrayLike:
    """
    Complete elliptic integral of the first kind.

    Args:
        xi: Modulus k, 0 <= k < 1 (scalar or array)
        convention: Integration range convention

    Returns:
        K(k) in the requested convention

    Raises:
        EllipticDomainError: k < 0 or k within the singular guard of 1
    """
    xi = _as_modulus(xi, allow_one=False)
    return _unwrap(convention.scale * special.ellipk(xi ** 2))


def elliptic_E(xi: ArrayLike, convention: EllipticConvention = EllipticConvention.DOUBLED) -> ArrayLike:
    """Complete elliptic integral of the second kind, 0 <= k <= 1."""
    xi = _as_modulus(xi, allow_one=True)
    return _unwrap(convention.scale * special.ellipe(xi ** 2))


# ==============================================================================
# PSI KERNEL
# ==============================================================================

def _psi_series_coefficients(terms: int) -> np.ndarray:
    """c_n for n = 2..terms+1 in psi_std(m) = (pi/2) sum c_n m^n."""
    a = np.empty(terms + 2)
    a[0] = 1.0
    for n in range(1, terms + 2):
        a[n] = a[n - 1] * ((2 * n - 1) / (2 * n)) ** 2
    n = np.arange(2, terms + 2)
    return a[n] * 2 * n / (2 * n - 1) - a[n - 1] / 2


_PSI_COEFFS = _psi_series_coefficients(config.PSI_SERIES_TERMS)
_SERIES_MAX_M = config.PSI_SERIES_MAX_MODULUS ** 2


def psi_over_m2(m: ArrayLike, convention: EllipticConvention = EllipticConvention.STANDARD) -> np.ndarray:
    """
    psi / m^2 as a function of the parameter m = k^2.

    Finite at m = 0 (value pi/32 in STANDARD), which lets callers divide the
    k^3 growth of psi/k out analytically instead of numerically.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m < 0) or np.any(m >= 1 - config.SINGULAR_MODULUS_GUARD):
        raise EllipticDomainError(
            f"parameter m = k^2 must lie in [0, 1), got max {float(np.max(m))!r}"
        )
    out = np.empty_like(m)
    small = m < _SERIES_MAX_M
    if np.any(small):
        # Horner over c_2 + c_3 m + c_4 m^2 + ...
        ms = m[small]
        acc = np.zeros_like(ms)
        for c in _PSI_COEFFS[::-1]:
            acc = acc * ms + c
        out[small] = (np.pi / 2) * acc
    big = ~small
    if np.any(big):
        mb = m[big]
        out[big] = ((1 - mb / 2) * special.ellipk(mb) - special.ellipe(mb)) / mb ** 2
    return convention.scale * out


def psi(xi: ArrayLike, convention: EllipticConvention = EllipticConvention.DOUBLED) -> ArrayLike:
    """
    psi(k) = (1 - k^2/2) K(k) - E(k).

    Small moduli go through the power series so the k^4 leading behaviour
    (pi/32 k^4 STANDARD, pi/16 k^4 DOUBLED) survives without cancellation.
    """
    xi = _as_modulus(xi, allow_one=False)
    m = xi ** 2
    return _unwrap(psi_over_m2(m, convention) * m ** 2)


# ==============================================================================
# ADAPTIVE 2-D QUADRATURE
# ==============================================================================

def adaptive_quad_2d(
    integrand: Callable[[np.ndarray], np.ndarray],
    tol: float = config.NEUMANN_RTOL,
    atol: float = 0.0,
    bounds: Sequence[Tuple[float, float]] = ((0.0, 2 * np.pi), (0.0, 2 * np.pi)),
    max_subdivisions: int = config.QUAD_MAX_SUBDIVISIONS,
) -> float:
    """
    Adaptive cubature of a scalar integrand over a rectangle.

    Args:
        integrand: Vectorized callable, points of shape (n, 2) -> values (n,)
        tol: Relative tolerance
        atol: Absolute tolerance floor
        bounds: ((a1, b1), (a2, b2)) integration limits
        max_subdivisions: Region budget before giving up

    Returns:
        Integral estimate

    Raises:
        QuadratureError: the error estimate did not fall below the tolerance
    """
    lower = [b[0] for b in bounds]
    upper = [b[1] for b in bounds]
    res = integrate.cubature(
        integrand, lower, upper,
        rtol=tol, atol=atol, max_subdivisions=max_subdivisions,
    )
    estimate = float(np.real(res.estimate))
    error = float(res.error)
    if res.status != 'converged' or error > tol * abs(estimate) + atol:
        raise QuadratureError(
            f"2-D quadrature did not converge: estimate {estimate:.6e}, "
            f"error {error:.3e}, tolerance {tol:.1e} (status {res.status})"
        )
    return estimate
