"""Exception types shared across the pipeline."""


class CodedInferenceError(Exception):
    """Base class for all library errors."""


class ConfigError(CodedInferenceError):
    """Invalid (K, S, E) parameter triple or malformed derived configuration."""


class DimensionError(CodedInferenceError):
    """Vector/matrix shape mismatch in a batch, codec call, or predictor."""


class InsufficientResultsError(CodedInferenceError):
    """Too few surviving worker results to satisfy the decoding quorum."""


class InsufficientPointsError(CodedInferenceError):
    """Too few sample points for the number of unknown polynomial coefficients."""


class RecoveryError(CodedInferenceError):
    """Rational recovery failed (no nontrivial solution, or degenerate denominator)."""


class InconsistentRoundError(CodedInferenceError):
    """Post-exclusion residual indicates more corruptions than the configured budget."""


class WeightsFormatError(CodedInferenceError):
    """Malformed or internally inconsistent serialized model weights."""


class RoundFailureError(CodedInferenceError):
    """A serving round could not complete (quorum unreachable by the deadline).

    Carries the set of workers that did respond so the caller can diagnose.
    """

    def __init__(self, message: str, responsive: set[int] | None = None):
        super().__init__(message)
        self.responsive = set(responsive or ())


class ProtocolError(CodedInferenceError):
    """Malformed frame on the worker wire protocol."""
