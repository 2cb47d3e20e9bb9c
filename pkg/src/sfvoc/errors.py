"""Exception types shared across the package."""


class InsufficientLengthError(ValueError):
    """Waveform shorter than one analysis frame."""


class SymmetryError(ValueError):
    """Spectrum rows violate conjugate symmetry beyond tolerance."""


class AliasingError(ValueError):
    """Requested instantaneous frequency at or above Nyquist."""


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class BadMagicError(CheckpointError):
    """File does not start with the checkpoint magic tag."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class TruncatedCheckpointError(CheckpointError):
    """Checkpoint file ended before all declared data."""


class ConfigMismatchError(ValueError):
    """Checkpoint and runtime inputs disagree (shapes, rates, feature dims)."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""
