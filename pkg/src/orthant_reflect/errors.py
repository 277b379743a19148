"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`OrthantReflectError`, itself a ``ValueError``, so callers that only
care about "bad input" can catch one type.
"""

from __future__ import annotations


class OrthantReflectError(ValueError):
    pass


# matrix validation

class NegativeEntry(OrthantReflectError):
    pass


class NonzeroDiagonal(OrthantReflectError):
    pass


class NormNotSubunit(OrthantReflectError):
    pass


# paths

class ZeroDensity(OrthantReflectError):
    pass


class NonpositiveHorizon(OrthantReflectError):
    pass


class DensityMismatch(OrthantReflectError):
    pass


class DimensionMismatch(OrthantReflectError):
    pass


# solvers

class MaxIterExceeded(OrthantReflectError, RuntimeError):
    pass


class StartOutsideOrthant(OrthantReflectError):
    pass


class NonFiniteCoefficient(OrthantReflectError, FloatingPointError):
    pass


class NotADivisor(OrthantReflectError):
    pass


class InsufficientPaths(OrthantReflectError):
    pass


# harness

class UnknownScenario(OrthantReflectError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class ConfigParse(OrthantReflectError):
    pass


class DegenerateInput(OrthantReflectError):
    pass


class VerificationFailed(OrthantReflectError, AssertionError):
    """An internal cross-check between equivalent formulations disagreed."""
