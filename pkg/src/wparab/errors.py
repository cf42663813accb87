"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class NonIntegrable(ToolkitError):
    """A requested power of a weight is not locally integrable."""


class EmptyBall(ToolkitError):
    """A ball does not intersect the weight's domain."""


class EmptyRegion(ToolkitError):
    """A cylinder or clipped region has zero measure."""


class NoBracket(ToolkitError):
    """The height map cannot reach the requested value on its domain."""


class GateFailed(ToolkitError):
    """A smallness precondition (oscillation or exponent gate) fails."""


class PreconditionFailed(ToolkitError):
    """A normalization or density precondition of an audit fails."""


class SingularSystem(ToolkitError):
    """A linear system arising in a time step could not be factored."""


class EllipticityViolation(ToolkitError):
    """A coefficient field violates its ellipticity certificate."""


class ConfigError(ToolkitError):
    """An experiment configuration is malformed or inconsistent."""
