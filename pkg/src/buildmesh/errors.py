"""Exception hierarchy shared across the package."""


class BuildmeshError(Exception):
    """Base class for all package errors."""


class GeometryError(BuildmeshError):
    """Invalid geometric input (empty cloud, degenerate mesh, ...)."""


class MeshFormatError(BuildmeshError):
    """Malformed mesh / point-cloud file.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CodecError(BuildmeshError):
    """Malformed token sequence.

    ``position`` is the 0-based index of the offending token when known.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position


class DeadEndError(BuildmeshError):
    """Constraint mask left no admissible token."""


class CheckpointError(BuildmeshError):
    """Unreadable or incompatible checkpoint file."""


class TrainingError(BuildmeshError):
    """Unrecoverable condition during optimization (no data, NaN loss)."""
