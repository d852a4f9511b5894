"""Exception hierarchy shared across the package."""


class LatentPathError(Exception):
    """Base class for all domain errors raised by latentpath."""


class ModelSyntaxError(LatentPathError):
    """Malformed model-language source. Carries line/column of the offense."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class ModelSpecificationError(LatentPathError):
    """Structurally valid syntax that violates a model invariant.

    Duplicate indicators, undeclared latents, cyclic regression graphs,
    covariances that cross the exogenous/endogenous indicator blocks.
    """


class DataError(LatentPathError):
    """Unusable input data: ragged rows, empty tables, missing variables."""


class NotPositiveDefiniteError(LatentPathError):
    """A matrix required to be positive definite is not."""


class UnderIdentifiedError(LatentPathError):
    """More free parameters than distinct sample moments."""


class EstimationError(LatentPathError):
    """Estimation could not produce a usable result (e.g. bootstrap collapse)."""
