"""Exception hierarchy used throughout the package."""


class MtsbError(Exception):
    """Base class for all package errors."""


class DimensionError(MtsbError, ValueError):
    pass


class SymmetryError(MtsbError, ValueError):
    pass


class OrthonormalityError(MtsbError, ValueError):
    pass


class RankError(MtsbError, ValueError):
    pass


class ConfigError(MtsbError, ValueError):
    pass


class StabilityError(MtsbError, ValueError):
    pass


class LagError(MtsbError, ValueError):
    pass


class OrderError(MtsbError, ValueError):
    pass


class InsufficientDataError(MtsbError, ValueError):
    pass


class IngestError(MtsbError, ValueError):
    pass


class StageError(MtsbError):
    """Wraps a failure inside a multi-stage pipeline with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
