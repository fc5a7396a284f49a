"""Exception types shared across the pipeline."""


class PhonofaceError(Exception):
    """Base class for all domain errors raised by this package."""


class AudioFormatError(PhonofaceError, ValueError):
    """Malformed or truncated WAV input."""


class UnsupportedAudioError(AudioFormatError):
    """WAV encoding outside PCM int8/16/32 and IEEE float."""


class ClipTooShortError(PhonofaceError, ValueError):
    """Audio clip shorter than one analysis window."""


class ShapeError(PhonofaceError, ValueError):
    """Inconsistent array shapes between inputs and expectations."""


class AlignmentParseError(PhonofaceError, ValueError):
    """Invalid alignment TSV content; carries the offending row number."""

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class LandmarkParseError(PhonofaceError, ValueError):
    """Invalid landmark CSV content."""


class DegenerateGeometryError(PhonofaceError, ValueError):
    """Geometric measurement undefined for the given points."""


class InsufficientDataError(PhonofaceError, ValueError):
    """Not enough samples or subjects to carry out the requested step."""


class DegeneratePairError(PhonofaceError, ValueError):
    """Chance-level MSE is zero (constant targets); the ratio test is undefined."""


class DivergenceError(PhonofaceError, RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, message: str, epoch: int | None = None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class RunError(PhonofaceError, RuntimeError):
    """A full experiment run could not produce any result."""


class CheckpointError(PhonofaceError, ValueError):
    """Corrupt or incompatible parameter checkpoint file."""


class CacheFormatError(PhonofaceError, ValueError):
    """Corrupt spectrogram cache file."""
