"""Exception types shared across the package."""


class SphereflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SphereflowError):
    """Invalid configuration: bad grid/operator sizes, malformed run configs."""


class InvalidInputError(SphereflowError):
    """Input violates a documented precondition (e.g. non-unit constant datum)."""


class DegenerateProjectionError(SphereflowError):
    """Sphere projection requested for a vector too close to the origin."""


class StepSizeError(SphereflowError):
    """Implicit midpoint fixed point failed to converge; reduce the time step."""


class EstimationError(SphereflowError):
    """Not enough samples to form the requested statistical estimate."""
