"""Exception hierarchy shared across the package."""


class WindBridgeError(Exception):
    """Base class for all package errors."""


class InputError(WindBridgeError, ValueError):
    """Invalid argument or malformed input data."""


class EstimationError(WindBridgeError, RuntimeError):
    """A statistical fit could not be produced from the given data."""


class InsufficientDataError(EstimationError):
    """Too few observations for the requested estimate."""


class SimulationError(WindBridgeError, RuntimeError):
    """A simulation could not be carried out (bad kernel state, failed path, ...)."""
