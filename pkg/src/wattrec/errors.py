"""Exception types shared across the package."""


class WattrecError(Exception):
    """Base class for all package-specific errors."""


class DataError(WattrecError):
    """Malformed or unusable input data."""


class ConfigError(WattrecError):
    """Invalid experiment or meter configuration."""


class SplitCacheError(WattrecError):
    """A cached split is missing, corrupted, or fails its checksum."""


class CapacityError(WattrecError):
    """A model refuses to run because its memory estimate exceeds the budget.

    Raised instead of letting the allocation crash the process; ensembles
    propagate it so a run is recorded as failed("capacity").
    """


class MeterBusyError(WattrecError):
    """A measurement session is already active on the device."""


class UndefinedEnergyError(WattrecError):
    """Too few valid samples to compute session energy."""


class BaselineDriftError(WattrecError):
    """Idle power is outside the configured acceptance band."""
