"""Exception types shared across the wavex modules."""


class WavexError(Exception):
    """Base class for all wavex-specific errors."""


class MismatchedFrequency(WavexError):
    """Two fields that must share a spectral value do not."""


class InvalidSpeed(WavexError):
    """Propagation speed outside the admissible range."""


class InvalidFrequency(WavexError):
    """Spectral value must be positive."""


class DegenerateField(WavexError):
    """A random field collapsed to (near-)zero variance; normalization undefined."""


class InvalidWavenumber(WavexError):
    """Wavenumber must be positive."""


class NoConvergence(WavexError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class SingularSystem(WavexError):
    """Linear system factorization failed."""


class UnknownDomain(WavexError):
    """Benchmark domain tag not recognized."""


class ZeroDenominator(WavexError):
    """Relative metric undefined: reference field (and its differences) vanish."""


class ZeroWeight(WavexError):
    """Weighted metric undefined: total weight is zero."""


class ZeroNorm(WavexError):
    """Cosine similarity undefined for a zero-norm input."""


class MissingReference(WavexError):
    """Reference frequency absent from the supplied per-frequency data."""


class EmptyInput(WavexError):
    """Operation requires at least one value."""


class ModeOverflow(WavexError):
    """Requested spectral modes exceed what the grid provides."""


class ShapeMismatch(WavexError):
    """Operand shapes are incompatible."""


class FrozenModel(WavexError):
    """Attempt to update parameters of a frozen model."""


class NotFrozen(WavexError):
    """Operation requires a frozen model."""


class MissingCondition(WavexError):
    """A training sample lacks its precomputed conditioning inputs."""


class NonFinite(WavexError):
    """Numerical trajectory produced NaN or Inf."""


class BadMagic(WavexError):
    """File does not start with the expected magic bytes."""


class TruncatedFile(WavexError):
    """File ended before the declared payload was read."""


class VersionMismatch(WavexError):
    """File declares an unsupported format version."""


class UnknownFrequency(WavexError):
    """Dataset contains a frequency outside the configured LF/HF sets."""


class InsufficientFrequencies(WavexError):
    """Similarity analysis needs fields at two or more frequencies."""
