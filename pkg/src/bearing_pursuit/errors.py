"""Exception hierarchy for the bearing_pursuit package."""


class BearingPursuitError(Exception):
    """Base class for all library errors."""


class DegenerateVector(BearingPursuitError):
    """A direction was requested from a (near-)zero vector."""


class NotSymmetric(BearingPursuitError):
    """A matrix required to be symmetric is not, beyond tolerance."""


class InvalidDt(BearingPursuitError):
    """Non-positive or non-finite time step."""


class NumericalFailure(BearingPursuitError):
    """An inversion or update became ill-conditioned or non-finite."""


class NotYetObservable(BearingPursuitError):
    """The information matrix is singular; no point estimate exists yet."""


class ShapeMismatch(BearingPursuitError):
    """Network / array shapes do not chain."""


class ZeroLayer(BearingPursuitError):
    """A network layer is identically zero and cannot be normalized."""


class ConfigError(BearingPursuitError):
    """Base class for configuration problems."""


class ParseError(ConfigError):
    """The config file could not be parsed."""


class ValidationError(ConfigError):
    """The config parsed but a field is invalid; message names the field."""


class EmptyRun(BearingPursuitError):
    """Metrics were requested from a run with no ticks."""


class CheckpointError(BearingPursuitError):
    """A training checkpoint is missing pieces or inconsistent."""
