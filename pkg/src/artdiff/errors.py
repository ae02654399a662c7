"""Exception hierarchy.

Everything raised on purpose by this package derives from :class:`ArtDiffError`,
and most errors are also :class:`ValueError` so that callers validating inputs
can catch the broader builtin.
"""


class ArtDiffError(Exception):
    """Base class for package errors."""


class InvalidRotationError(ArtDiffError, ValueError):
    pass


class InvalidValueError(ArtDiffError, ValueError):
    pass


class MaskNotConcreteError(ArtDiffError, ValueError):
    pass


class IncompleteSequenceError(ArtDiffError, ValueError):
    pass


class InvalidParameterError(ArtDiffError, ValueError):
    pass


class InvalidStepError(ArtDiffError, ValueError):
    pass


class SequenceShapeError(ArtDiffError, ValueError):
    pass


class EstimationFailedError(ArtDiffError, RuntimeError):
    """A denoiser raised or returned an invalid distribution during sampling."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step t={step})")
        self.step = step


class DegenerateAxisError(ArtDiffError, ValueError):
    pass


class JointLimitError(ArtDiffError, ValueError):
    pass


class InvalidComparisonError(ArtDiffError, ValueError):
    pass


class InvalidTreeError(ArtDiffError, ValueError):
    pass


class InvalidDatasetError(ArtDiffError, ValueError):
    pass


class InvalidObservationError(ArtDiffError, ValueError):
    pass


class GenerationFailedError(ArtDiffError, RuntimeError):
    pass


class ConfigError(ArtDiffError, ValueError):
    pass


class SchemaVersionError(ArtDiffError, ValueError):
    pass
