"""
Error Taxonomy

Every failure the toolkit raises on purpose derives from RAShViTError and
carries the CLI exit code for its family:

    1  usage / validation  (ConfigError)
    2  data                (DataError)
    3  numeric failure     (NumericError)

Value-like errors also subclass ValueError so callers can catch them the
usual way.
"""


class RAShViTError(Exception):
    """Base class for all toolkit errors."""
    exit_code: int = 1


# =============================================================================
# USAGE / VALIDATION (exit 1)
# =============================================================================

class ConfigError(RAShViTError, ValueError):
    """Invalid configuration, flag grammar, or ablation variant."""
    exit_code = 1


# =============================================================================
# DATA (exit 2)
# =============================================================================

class DataError(RAShViTError):
    """Problem with input signals, archives, or checkpoints."""
    exit_code = 2


class EmptyInputError(DataError, ValueError):
    """Signal shorter than the requested window, or an empty split."""


class DegenerateSignalError(DataError, ValueError):
    """Segment with zero power where a positive power is required."""


class ShapeError(DataError, ValueError):
    """Tensor or segment with the wrong shape."""


class UnsupportedLengthError(DataError, ValueError):
    """FFT length that is not a power of two."""


class MissingFileError(DataError, FileNotFoundError):
    """Archive entry refers to a file that does not exist."""


class ShortFileError(DataError, ValueError):
    """Archive file holds fewer samples than its manifest entry claims."""


class LabelGapError(DataError, ValueError):
    """Manifest labels are not dense in [0, K)."""

    def __init__(self, missing: int, num_classes: int):
        self.missing = missing
        self.num_classes = num_classes
        super().__init__(
            f"label {missing} has no entries (labels must cover 0..{num_classes - 1})"
        )


class InsufficientClassError(DataError, ValueError):
    """A class has fewer segments than the split needs."""


class ClassCountMismatchError(DataError, ValueError):
    """Checkpoint and dataset disagree on the number of classes."""


class CheckpointFormatError(DataError, ValueError):
    """Checkpoint file does not follow the RASHVIT1 layout."""


# =============================================================================
# NUMERIC (exit 3)
# =============================================================================

class NumericError(RAShViTError):
    """Numerical failure during computation."""
    exit_code = 3


class DivergenceError(NumericError, ArithmeticError):
    """Training produced a non-finite loss."""


class NonScalarLossError(NumericError, ValueError):
    """backward() called on a tensor with more than one element."""


class GradCheckFailure(NumericError):
    """One or more ops disagree with finite differences."""

    def __init__(self, failures: dict):
        self.failures = failures
        names = ", ".join(f"{k} ({v:.2e})" for k, v in failures.items())
        super().__init__(f"gradient check failed for: {names}")
