"""
Exceptions raised by the laboratory.

Fail verdicts are never exceptions: a certificate that does not pass is a
result. These classes signal refusals (violated preconditions), invalid
inputs and numerical breakdowns.
"""


class LabError(Exception):
    """Base class for every laboratory error."""


class GeometryError(LabError, ValueError):
    """Invalid warping profile, domain or grid."""


class ConfigurationError(LabError, ValueError):
    """Experiment configuration rejected before any computation."""


class PreconditionError(LabError, ValueError):
    """An operation was called on inputs outside its hypotheses."""


class IncompleteModelError(PreconditionError):
    """A completeness-dependent statement was requested on an incomplete model."""


class DiscretizationError(LabError, ArithmeticError):
    """The discrete problem broke down (singular system, lost positivity, grid too coarse)."""


class ConvergenceError(LabError, ArithmeticError):
    """An iterative method stagnated; carries the last iterate diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
