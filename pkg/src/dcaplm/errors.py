"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`DcaplmError`.
The three intermediate classes map onto the CLI exit codes (2, 3, 4).
"""


class DcaplmError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(DcaplmError, ValueError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(DcaplmError, ValueError):
    """Input data cannot be used as supplied."""

    exit_code = 3


class NumericalError(DcaplmError, ArithmeticError):
    """A numerical procedure failed (singular design, non-SPD matrix, ...)."""

    exit_code = 4


class DomainError(DataError):
    """A covariate value falls outside the basis domain [0, 1] after transformation."""

    def __init__(self, column, value, message=None):
        self.column = column
        self.value = value
        super().__init__(
            message or f"value {value!r} in column {column!r} lies outside the fitted domain"
        )


class DegenerateCovariateError(DataError):
    """A covariate column is constant, so no affine map onto [0, 1] exists."""


class EmptyDatasetError(DataError):
    """No usable rows remain after ingestion."""


class UnderdeterminedGroupError(DataError):
    """A group has too few observations for the number of model parameters."""

    def __init__(self, message, group_id=None):
        self.group_id = group_id
        super().__init__(message)


class DegenerateBasisError(NumericalError):
    """The reference basis column has (numerically) zero sample mean."""


class SingularDesignError(NumericalError):
    """The least-squares design matrix is rank deficient."""

    def __init__(self, message, column=None, group_id=None):
        self.column = column
        self.group_id = group_id
        super().__init__(message)


class NotPositiveDefiniteError(NumericalError):
    """A matrix expected to be symmetric positive definite is not."""


class IncompatibleFitError(NumericalError):
    """Sub-population fits do not share one spline configuration."""
