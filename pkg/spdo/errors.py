"""Exception hierarchy for user-facing errors.

`cli.main` catches `SpdoError` and prints a one-line message instead of a
traceback. Anything that is *not* a `SpdoError` is treated as a bug and
propagates normally.
"""
from __future__ import annotations


class SpdoError(Exception):
    """Base class for all user-facing spdo errors."""


class SpdoConfigError(SpdoError):
    """Config file missing, malformed, or failing validation."""


class SpdoInputError(SpdoError, ValueError):
    """Arguments or data outside the domain of an operation."""


class SpdoNumericalError(SpdoError):
    """A numerical step failed in a way the theory says it should not."""


class SpdoNotPositiveDefiniteError(SpdoNumericalError):
    """Cholesky breakdown: the assembled matrix is not SPD."""

    def __init__(self, message: str, *, order: int, pivot: float) -> None:
        super().__init__(message)
        self.order = order
        self.pivot = pivot


class SpdoTruncationError(SpdoNumericalError):
    """Neglected series tail diverges or exceeds the configured tolerance."""


class SpdoUnisolvencyError(SpdoNumericalError):
    """Constraint functionals do not determine the kernel component."""


class SpdoEllipticityError(SpdoNumericalError):
    """Symbol fails the two-sided power-law bound off its kernel."""


class SpdoQuadratureError(SpdoNumericalError):
    """Fourier–Legendre coefficients came out negative."""
