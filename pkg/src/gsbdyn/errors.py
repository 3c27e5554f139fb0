"""Exception hierarchy shared across the package.

All numerical/physical failures derive from GsbError so callers (and the
CLI exit-code mapping) can distinguish them from configuration problems.
"""


class GsbError(Exception):
    """Base class for model / numerics errors."""


class FlatKernelNotSampleable(GsbError):
    """A flat form factor has a delta-function memory kernel; it cannot be
    sampled on a time grid.  Use the closed-form propagator instead."""


class InvalidBandwidth(GsbError):
    """Bath discretization window is not positive."""


class StepTooCoarse(GsbError):
    """Time step violates the stability guard h * ||G(0)|| <= 0.1."""


class MixedKinds(GsbError):
    """Closed-form flat propagation requires every form factor to be flat."""


class NotContractive(GsbError):
    """No Kraus set exists: the survival operator has norm > 1."""


class SingularSurvival(GsbError):
    """Survival operator is numerically singular at the requested time."""


class NonUniformGrid(GsbError):
    """Operation requires a uniform time grid."""


class TimeNotOnGrid(GsbError):
    """Requested time does not coincide with a grid point (interpolation
    is deliberately not supported)."""


class BasisTooLarge(GsbError):
    """Truncated Fock basis would exceed the configured size cap."""


class ConvergenceFailure(GsbError):
    """Propagator could not meet its error target."""


class TruncationOverflow(GsbError):
    """An operator insertion would move amplitude outside the truncated
    excitation space; re-run with a larger N_max."""


class InvariantViolation(GsbError):
    """A built-in self-check failed (used by the validate command)."""
