"""Exception types shared across the package."""


class GihelmError(Exception):
    """Base class for package-specific failures."""


class SingularSystemError(GihelmError):
    """Dense factorization hit a pivot below the singularity threshold."""


class SingularEvaluationError(GihelmError):
    """A field was evaluated exactly at the source point with no finite-cell rule."""


class ResourceLimitError(GihelmError):
    """A dense-path request exceeded its configured size cap."""


class FieldFormatError(GihelmError):
    """A field/checkpoint file failed structural validation.

    ``byte_offset`` carries the position of the first inconsistency when known.
    """

    def __init__(self, message, byte_offset=None):
        if byte_offset is not None:
            message = f"{message} (at byte {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class ConfigError(GihelmError):
    """A run configuration failed validation."""


class NonFiniteLossError(GihelmError):
    """Training produced a non-finite loss; carries the diagnostic checkpoint path."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
