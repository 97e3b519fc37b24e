"""Exception types raised across the package."""


class FairAuditError(Exception):
    """Base class for all package errors."""


class ConfigError(FairAuditError, ValueError):
    """Invalid configuration, schema declaration or argument."""


class SchemaError(FairAuditError, ValueError):
    """CSV header and declared schema disagree."""


class ParseError(FairAuditError, ValueError):
    """A CSV token could not be interpreted under its column schema."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class EmptyDatasetError(FairAuditError, ValueError):
    """An operation left no rows."""


class UnfittableColumnError(FairAuditError, ValueError):
    """A feature column has no observed training values."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has no observed values in the training data")


class IncompatibleSchemaError(FairAuditError, ValueError):
    """Dataset does not match the columns a fitted object was built on."""


class DegenerateLabelsError(FairAuditError, ValueError):
    """Training labels contain a single class."""
