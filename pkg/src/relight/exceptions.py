"""Exception types shared across the package."""


class RelightError(Exception):
    """Base class for all library errors."""


class ShapeError(RelightError, ValueError):
    """An input tensor has incompatible spatial dims or channel count."""


class ConfigurationError(RelightError, ValueError):
    """A config value, mode name, or block wiring is invalid."""


class DatasetError(RelightError, ValueError):
    """A dataset directory is missing, empty, or has the wrong pair counts."""


class CheckpointError(RelightError, RuntimeError):
    """A checkpoint file is corrupt or does not match the target model."""


class TrainingDivergedError(RelightError, RuntimeError):
    """Training hit a non-finite loss.

    Carries a reference to the last checkpoint written before the failure
    (None if no checkpoint had been saved yet).
    """

    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint
