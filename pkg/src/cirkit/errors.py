"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class EmptyProfileError(ValidationError):
    """Power delay profile has no bin above the detection threshold."""


class InternalConsistencyError(RuntimeError):
    """A mathematical identity that must hold was violated beyond rounding."""


class FileFormatError(ValueError):
    """A file does not conform to its on-disk format."""


class CorruptFileError(FileFormatError):
    """File payload is structurally damaged (truncation, odd float count)."""


class BadMagicError(FileFormatError):
    """Dataset file does not start with the expected magic bytes."""


class BadVersionError(FileFormatError):
    """Dataset file declares an unsupported format version."""


class SizeMismatchError(FileFormatError):
    """Declared lengths in a header disagree with the actual file size."""


class MissingSidecarError(FileFormatError):
    """Raw IQ file has no metadata sidecar next to it."""
