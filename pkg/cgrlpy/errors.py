"""Define package errors."""


class CgrlError(Exception):
    """A base error."""

    pass


class CapacityError(CgrlError):
    """An error related to more vehicles than an observation can hold."""

    pass


class CheckpointFormatError(CgrlError):
    """An error related to unreadable or mismatched checkpoint files."""

    pass


class CollisionStateError(CgrlError):
    """An error related to car-following with a non-positive gap."""

    pass


class ConfigError(CgrlError):
    """An error related to invalid configuration."""

    pass


class DomainError(CgrlError):
    """An error related to inputs outside an operation's domain."""

    pass


class NumericError(CgrlError):
    """An error related to non-finite values or failed numerical routines."""

    pass


class DivergenceError(NumericError):
    """An error related to a training run that has blown up."""

    pass


class ScenarioError(CgrlError):
    """An error related to building a scenario."""

    pass


class ShapeError(CgrlError):
    """An error related to mismatched tensor shapes."""

    pass


class SimulationStateError(CgrlError):
    """An error related to stepping a world that cannot be stepped."""

    pass
