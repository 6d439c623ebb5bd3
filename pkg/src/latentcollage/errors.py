"""Exception hierarchy. Each error carries a stable machine-readable code
that the CLI and HTTP service surface verbatim."""


class LatentCollageError(Exception):
    """Base class for all package errors."""

    code = "ERROR"


class SpecMismatchError(LatentCollageError):
    """Latent code or image does not match the spec a model expects."""

    code = "SPEC_MISMATCH"


class ShapeMismatchError(LatentCollageError):
    code = "SHAPE_MISMATCH"


class DegenerateLatentError(LatentCollageError):
    """Zero (or numerically zero) latent vector where a direction is required."""

    code = "DEGENERATE_LATENT"


class EmptyInputError(LatentCollageError):
    code = "EMPTY_INPUT"


class EmptyMaskError(LatentCollageError):
    code = "EMPTY_MASK"


class TrainingDivergedError(LatentCollageError):
    """Loss became non-finite. Carries the step index where it happened."""

    code = "TRAINING_DIVERGED"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class OptimizationDivergedError(LatentCollageError):
    code = "OPTIMIZATION_DIVERGED"


class NumericalFailureError(LatentCollageError):
    code = "NUMERICAL_FAILURE"


class InsufficientSamplesError(LatentCollageError):
    code = "INSUFFICIENT_SAMPLES"


class UnknownExtractorError(LatentCollageError):
    code = "UNKNOWN_EXTRACTOR"


class ExtractorMismatchError(LatentCollageError):
    code = "EXTRACTOR_MISMATCH"


class OverlappingRegionsError(LatentCollageError):
    code = "OVERLAPPING_REGIONS"


class UnknownModelError(LatentCollageError):
    code = "UNKNOWN_MODEL"


class CheckpointError(LatentCollageError):
    code = "CHECKPOINT_ERROR"
