"""
Exception hierarchy for the OAM-NFC link simulator.

Everything raised on purpose by the package derives from ``OamNfcError`` and
also from the builtin the failure most resembles (``ValueError`` for bad
inputs, ``RuntimeError`` for numerical breakdowns), so callers can catch
either way.
"""

from typing import Optional, Tuple


class OamNfcError(Exception):
    """Base class for all package errors."""


class ConfigError(OamNfcError, ValueError):
    """Invalid or unreadable simulation configuration."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = ''
        if key is not None:
            where += f"[{key}] "
        if line is not None:
            where += f"(line {line}) "
        super().__init__(f"{where}{message}")


class GeometryError(OamNfcError, ValueError):
    """Infeasible coil layout: overlap, intersecting filaments, bad index or tilt."""


class EllipticDomainError(OamNfcError, ValueError):
    """Modulus outside the domain of the complete elliptic integrals."""


class ChannelShapeError(OamNfcError, ValueError):
    """Matrix dimensions that do not fit the requested operation."""


class SParameterError(OamNfcError, ValueError):
    """Malformed S-parameter document."""

    def __init__(self, message: str, missing: Optional[Tuple[int, int]] = None):
        self.missing = missing
        super().__init__(message)


class NumericalError(OamNfcError, RuntimeError):
    """A numerical procedure could not deliver a trustworthy value."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class RankDeficientError(NumericalError):
    """Matrix to be pseudo-inverted has lost rank."""

    def __init__(self, rank: int, expected: int, condition: float):
        self.rank = rank
        self.expected = expected
        self.condition = condition
        super().__init__(
            f"estimated channel is rank deficient: rank {rank} of {expected} "
            f"(condition number {condition:.3e})"
        )
