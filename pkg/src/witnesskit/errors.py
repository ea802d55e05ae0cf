"""Exception hierarchy shared by all witnesskit modules.

Plain domain errors (bad lengths, zero modulus, ...) are raised as
``ValueError`` subclasses so callers can catch them the usual way.
"""


class WitnessKitError(Exception):
    """Base class for every witnesskit-specific error."""


class NonResidue(WitnessKitError, ValueError):
    """The value has no square root modulo the given prime."""

    def __init__(self, c, p):
        super().__init__(f"{c} is not a quadratic residue mod {p}")
        self.c = c
        self.p = p


class FactorLeak(WitnessKitError, ValueError):
    """gcd(c, n) > 1 was observed, which exposes a factor of n.

    This is a success path for the factoring reduction, so the factor
    travels with the exception.
    """

    def __init__(self, factor, n):
        super().__init__(f"gcd with {n} is {factor}: factor leaked")
        self.factor = factor
        self.n = n


class ProtocolViolation(WitnessKitError):
    """A solver broke the rules of the game (bad index, malformed output)."""


class HarnessInvariantViolation(WitnessKitError):
    """A teacher flagged honest gave an answer the checker rejects."""


class ConfigError(WitnessKitError, ValueError):
    """Unknown solver/experiment id or an invalid parameter combination."""


class AuditViolation(WitnessKitError):
    """The output-counting audit found more outputs than inputs allow."""
