"""Exception types shared across the package.

Validation failures raise; expected negative outcomes of a computation
(non-convergence of a flow, absence of a root) are returned as values
instead, see solvers.NonConvergence and solvers.NoSolution.
"""


class ClarkLabError(Exception):
    """Base class for all package errors."""


class DimensionError(ClarkLabError):
    """Coordinate length does not match the ambient space."""


class InvalidPoint(ClarkLabError):
    """Non-finite or otherwise malformed coordinates."""


class InvalidParams(ClarkLabError):
    """Constructor parameters outside their admissible range."""


class EmptyInput(ClarkLabError):
    """An operation received an empty collection it cannot work with."""


class OriginMissing(ClarkLabError):
    """No point of the cloud lies at the origin (within tolerance)."""


class NotInGenusFamily(ClarkLabError):
    """The set description admits no genus certificate (e.g. contains 0)."""


class SetupInconsistent(ClarkLabError):
    """Deformation bounds are contradicted by sampled data."""


class DeformationFailure(ClarkLabError):
    """The deformation contract failed on a concrete trajectory."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class IntegrationError(ClarkLabError):
    """An ODE integration did not reach the requested accuracy or span."""


class NoNegativeCertificate(ClarkLabError):
    """No sphere in the searched family produced a negative supremum."""


class NoCrossing(ClarkLabError):
    """Shooting trajectory produced no return to zero before t_max."""
