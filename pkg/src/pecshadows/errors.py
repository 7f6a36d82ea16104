"""Exception types shared across the toolkit."""


class ShadowsError(Exception):
    """Base class for toolkit errors."""


class DimensionOverflowError(ShadowsError, ValueError):
    """A dense matrix or enumeration would exceed its configured cap."""


class InvalidDeviationError(ShadowsError, ValueError):
    """Principal deviation outside [0, 1/2)."""


class SpectrumOrderError(ShadowsError, ValueError):
    """Principal eigenvalue is not strictly the largest."""


class InfeasibleError(ShadowsError, ValueError):
    """Requested quantity cannot be realised under the constraints."""


class NotExchangeableError(ShadowsError, ValueError):
    """Operator does not commute with the qudit permutations."""


class ContractViolation(ShadowsError, ValueError):
    """Function called outside its documented precondition."""


class SamplerError(ShadowsError, RuntimeError):
    """Rejection sampler exhausted its proposal budget."""


class ConfigError(ShadowsError, ValueError):
    """Invalid experiment configuration."""
