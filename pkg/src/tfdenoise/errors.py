"""Exception hierarchy shared by every tfdenoise module."""


class DenoiseError(Exception):
    """Base class for all tfdenoise errors."""


class ShapeMismatch(DenoiseError, ValueError):
    pass


class LengthMismatch(DenoiseError, ValueError):
    pass


# --- time-frequency embedding / inversion ---
class TrackTooLong(DenoiseError, ValueError):
    """Track needs less than the minimum 25% overlap; split it first."""


class TrackTooShort(DenoiseError, ValueError):
    pass


class InsufficientOverlap(DenoiseError, ValueError):
    pass


class ZeroReference(DenoiseError, ValueError):
    pass


# --- audio io / mixing / corpus ---
class UnsupportedFormat(DenoiseError, ValueError):
    pass


class CorruptHeader(DenoiseError, ValueError):
    pass


class ZeroNoise(DenoiseError, ValueError):
    pass


class ZeroClean(DenoiseError, ValueError):
    pass


class NoiseTooShort(DenoiseError, ValueError):
    pass


class EmptyCorpus(DenoiseError, ValueError):
    pass


# --- autodiff ---
class NonPositiveEps(DenoiseError, ValueError):
    pass


class NonScalarLoss(DenoiseError, ValueError):
    pass


# --- checkpoints ---
class CorruptCheckpoint(DenoiseError):
    pass


class VersionMismatch(DenoiseError):
    """Checkpoint format version or model configuration does not match."""


# --- training ---
class ScoreOutOfRange(DenoiseError, ValueError):
    pass


class NoActiveLoss(DenoiseError, ValueError):
    pass


class DivergedError(DenoiseError, FloatingPointError):
    pass


# --- metrics ---
class TooShort(DenoiseError, ValueError):
    pass


class SilentReference(DenoiseError, ValueError):
    pass
