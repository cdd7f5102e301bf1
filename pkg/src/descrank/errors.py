"""Exception types raised across the package."""


class DescrankError(Exception):
    """Base class for all descrank errors."""


class DimensionMismatchError(DescrankError):
    """Vector or column lengths that were required to agree do not."""


class ZeroVectorError(DescrankError):
    """A vector with zero norm where cosine similarity is undefined."""


class InvalidScoreError(DescrankError):
    """A non-finite score where a finite one is required."""


class MissingEmbeddingError(DescrankError):
    """A required embedding key is absent from the embedding set."""

    def __init__(self, key: str):
        super().__init__(f"no embedding for key {key!r}")
        self.key = key


class BadPatternError(DescrankError):
    """A pattern template whose placeholder count is not exactly one."""


class ParseError(DescrankError):
    """A file that does not conform to its format.

    ``row`` and ``column`` locate the offending record when known; ``row``
    counts data records from 1 (the header is row 0).
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = ""
        if row is not None:
            loc += f" (row {row}"
            loc += f", column {column!r})" if column is not None else ")"
        elif column is not None:
            loc += f" (column {column!r})"
        super().__init__(message + loc)
        self.row = row
        self.column = column


class NoOverlapError(DescrankError):
    """Two label columns share no jointly observed item."""


class NeedTwoAnnotatorsError(DescrankError):
    """An operation that compares annotators got fewer than two."""


class InvalidParametersError(DescrankError):
    """Generative parameters outside their admissible ranges."""


class InvalidMatrixError(DescrankError):
    """A prediction matrix that fails validation was passed to inference.

    Carries the individual violations on ``violations``.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(v.message for v in self.violations)
        super().__init__(f"invalid prediction matrix: {lines}")


class EmbeddingServiceError(DescrankError):
    """The embedding service could not be reached or answered malformed data."""


class ConfigError(DescrankError):
    """An experiment configuration that violates its own constraints."""
