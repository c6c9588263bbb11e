"""Exception types shared across the package."""


class ChronorankError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ChronorankError, ValueError):
    """A configuration value or argument violates its documented bounds."""


class InvalidInputError(ChronorankError, ValueError):
    """Input data violates a structural contract (shape, range, finiteness)."""


class YearNotFoundError(ChronorankError, KeyError):
    """A year is absent from the relevance matrix vocabulary."""

    def __init__(self, year: int):
        super().__init__(year)
        self.year = year

    def __str__(self) -> str:
        return f"year {self.year} is not in the matrix year vocabulary"


class UndefinedMetricError(ChronorankError, ValueError):
    """The metric is undefined for the given inputs (e.g. no relevant docs at all)."""


class DegenerateEmbeddingError(ChronorankError, ValueError):
    """A pre-normalization embedding collapsed to the zero vector."""

    def __init__(self, batch_index: int):
        super().__init__(f"embedding at batch index {batch_index} has zero norm")
        self.batch_index = batch_index


class DegenerateVarianceError(ChronorankError, ValueError):
    """All input vectors are identical; principal directions are undefined."""


class EmptyIndexError(ChronorankError, ValueError):
    """The retrieval index contains no documents."""


class MatrixFormatError(ChronorankError, ValueError):
    """A persisted relevance matrix file is malformed or violates invariants."""


class TrainingDivergedError(ChronorankError, ArithmeticError):
    """The training loss left the finite range.

    ``iteration`` is the 0-based step that produced the non-finite loss;
    ``report`` holds everything completed before it.
    """

    def __init__(self, iteration: int, report):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration
        self.report = report


class DatasetValidationError(ChronorankError, ValueError):
    """One or more dataset records failed validation.

    ``errors`` holds one human-readable message per failing record,
    each prefixed with its line number in the source file.
    """

    def __init__(self, errors: list[str]):
        super().__init__(f"{len(errors)} invalid record(s): " + "; ".join(errors[:5]))
        self.errors = errors
