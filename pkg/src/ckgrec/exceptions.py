"""Exception types shared across the package."""


class DataFormatError(ValueError):
    """An input file violates the expected line format."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class SparsityError(ValueError):
    """A dataset became empty or unusable after filtering."""


class ConfigError(ValueError):
    """A run configuration file or override is invalid."""


class CheckpointError(RuntimeError):
    """A checkpoint file is missing, truncated, or incompatible."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss or parameter tensor.

    Carries the last set of parameters that were still finite so callers
    can persist them for post-mortem inspection.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good
