"""Exception hierarchy shared by all entroflow modules."""

from __future__ import annotations


class EntroflowError(Exception):
    """Base class for every error raised by this package."""


class DomainError(EntroflowError):
    """A natural-parameter vector lies outside the family's admissible domain."""


class SingularModelError(EntroflowError):
    """A covariance or metric matrix failed its positive-definiteness check."""


class UnknownMicrostateError(EntroflowError):
    """A microstate label does not belong to the family's state space."""


class InfeasibleMeanError(EntroflowError):
    """A mean vector lies outside the open set of attainable expectations."""


class NoConvergenceError(EntroflowError):
    """An iterative solver exhausted its iteration budget."""


class AtEquilibriumError(EntroflowError):
    """The entropy gradient vanishes; the flow direction is undefined."""


class StepCollapseError(EntroflowError):
    """Repeated step halving failed to produce an acceptable integration step.

    When raised by the integrator, the ``trajectory`` attribute holds the
    partial trajectory accumulated up to the failure (terminal status
    ``"error"``).
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepTooLargeError(EntroflowError):
    """A finite-difference stencil left the feasible region."""


class TooFewSamplesError(EntroflowError):
    """A trajectory does not contain enough samples for the requested analysis."""


class MonotonicityError(EntroflowError):
    """A trajectory component required to be strictly monotone is not."""


class IllConditionedError(EntroflowError):
    """A regression problem is too ill-conditioned to solve reliably."""


class ParseError(EntroflowError):
    """A configuration or data document is structurally malformed."""


class ValidationError(EntroflowError):
    """A parsed document violates one or more semantic invariants.

    The ``violations`` attribute lists every violated invariant.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
