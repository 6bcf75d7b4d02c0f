"""Exception types shared across the package."""


class AdaptMtError(Exception):
    """Base class for all adaptmt errors."""


class NumericError(AdaptMtError):
    """A non-finite value (NaN/Inf) showed up in a computation."""


class ConfigError(AdaptMtError):
    """A project configuration file is missing, malformed or invalid."""


class CheckpointError(AdaptMtError):
    """A model checkpoint could not be read or has the wrong format."""


class LogFormatError(AdaptMtError):
    """An effort-log document is malformed or has an unsupported version."""


class SimulationError(AdaptMtError):
    """A simulated post-editing run failed or was given mismatched inputs."""
