"""Exception types raised across the receiver chain."""


class FadefreeError(Exception):
    """Base class for all library errors."""


class ConfigError(FadefreeError):
    """Invalid configuration file, key, or value."""


class SyncNotFoundError(FadefreeError):
    """Correlation peak below the sync floor; frame start not located."""


class UnstableEqualizerError(FadefreeError):
    """LMS training diverged: unstable step size."""


class NonStationaryFitError(FadefreeError):
    """Levinson-Durbin reflection coefficient left the unit circle."""


class StateSpaceError(FadefreeError):
    """Full-state detector asked for a state space too large to enumerate."""


class DegenerateInputError(FadefreeError):
    """Input carries no usable signal (all-zero record, zero power, ...)."""


class StageError(FadefreeError):
    """A pipeline stage failed; carries the stage name for diagnosis."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
