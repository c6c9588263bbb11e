"""The editable year-by-year relevance matrix.

Rows are query years, columns are item years. A freshly generated matrix is
symmetric with its row maxima on the diagonal; user edits (region boosts,
single-cell sets) may deliberately break symmetry, which the ``provenance``
tag records. Instances are immutable: every edit returns a new matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, MatrixFormatError, YearNotFoundError
from .ranking import RelevanceKind, RelevanceSpec, relevance_log, relevance_thresholded

PROVENANCE_GENERATED = "generated"
PROVENANCE_EDITED = "edited"


@dataclass(frozen=True, eq=False)
class RelevanceMatrix:
    years: np.ndarray  # sorted distinct integer years
    values: np.ndarray  # |years| x |years|, nonnegative
    provenance: str
    spec: RelevanceSpec | None = None
    warning: str | None = field(default=None, compare=False)

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if years.ndim != 1 or years.size == 0:
            raise InvalidInputError("years must be a nonempty 1-D vector")
        if np.unique(years).size != years.size:
            raise InvalidInputError("years must be distinct")
        if not np.all(np.diff(years) > 0):
            raise InvalidInputError("years must be sorted ascending")
        if values.shape != (years.size, years.size):
            raise InvalidInputError(
                f"values must be {years.size}x{years.size}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("matrix values must be finite")
        if np.any(values < 0):
            raise InvalidInputError("matrix values must be nonnegative")
        if self.provenance not in (PROVENANCE_GENERATED, PROVENANCE_EDITED):
            raise InvalidInputError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)
        values.setflags(write=False)
        years.setflags(write=False)

    def year_index(self, year: int) -> int:
        pos = int(np.searchsorted(self.years, year))
        if pos >= self.years.size or self.years[pos] != year:
            raise YearNotFoundError(year)
        return pos


def _evaluate_spec(spec: RelevanceSpec, year_q: int, year_n: int, span: int) -> float:
    if spec.kind is RelevanceKind.THRESHOLDED:
        return relevance_thresholded(year_q, year_n, spec.window_years)
    if spec.kind is RelevanceKind.LOG_SCALED:
        if span == 0:  # single-year vocabulary: zero distance, zero span
            return 0.0
        return relevance_log(year_q, year_n, span)
    return float(spec.custom_fn(year_q, year_n))


def build_matrix(years, spec: RelevanceSpec) -> RelevanceMatrix:
    """Evaluate ``spec`` on every (query year, item year) pair."""
    years = np.asarray(sorted(years), dtype=np.int64)
    if years.size == 0:
        raise InvalidInputError("years must be nonempty")
    if np.unique(years).size != years.size:
        raise InvalidInputError("years must be distinct")
    span = int(years[-1] - years[0])
    values = np.empty((years.size, years.size), dtype=np.float64)
    for i, year_q in enumerate(years):
        for j, year_n in enumerate(years):
            values[i, j] = _evaluate_spec(spec, int(year_q), int(year_n), span)
    if np.any(values < 0):
        raise InvalidInputError("relevance spec produced a negative value")
    return RelevanceMatrix(years, values, PROVENANCE_GENERATED, spec)


def boost_region(
    matrix: RelevanceMatrix, year_lo: int, year_hi: int, factor: float
) -> RelevanceMatrix:
    """Scale every row whose query year falls in [year_lo, year_hi].

    An empty intersection with the matrix years leaves the values untouched
    and sets a warning on the returned matrix instead of raising.
    """
    if year_lo > year_hi:
        raise InvalidParameterError(f"year_lo {year_lo} exceeds year_hi {year_hi}")
    if factor <= 0:
        raise InvalidParameterError(f"factor must be > 0, got {factor}")
    mask = (matrix.years >= year_lo) & (matrix.years <= year_hi)
    if not np.any(mask):
        return replace(
            matrix, warning=f"no matrix years in [{year_lo}, {year_hi}]; boost was a no-op"
        )
    values = matrix.values.copy()
    values[mask, :] *= factor
    return RelevanceMatrix(matrix.years, values, PROVENANCE_EDITED, matrix.spec)


def set_cell(
    matrix: RelevanceMatrix, query_year: int, item_year: int, value: float
) -> RelevanceMatrix:
    """Replace one cell; the mirrored cell is left untouched."""
    if value < 0:
        raise InvalidParameterError(f"cell value must be >= 0, got {value}")
    row = matrix.year_index(query_year)
    col = matrix.year_index(item_year)
    values = matrix.values.copy()
    values[row, col] = value
    return RelevanceMatrix(matrix.years, values, PROVENANCE_EDITED, matrix.spec)


def row_for_query(matrix: RelevanceMatrix, query_year: int) -> np.ndarray:
    """The relevance row used to score a candidate batch for this query year."""
    return matrix.values[matrix.year_index(query_year)].copy()


def _spec_to_json(spec: RelevanceSpec | None):
    if spec is None:
        return None
    payload = {"kind": spec.kind.value}
    if spec.window_years is not None:
        payload["window_years"] = spec.window_years
    return payload


def _spec_from_json(payload) -> RelevanceSpec | None:
    if payload is None:
        return None
    if not isinstance(payload, dict) or "kind" not in payload:
        raise MatrixFormatError("field 'spec' must be an object with a 'kind'")
    kind = RelevanceKind(payload["kind"])
    if kind is RelevanceKind.CUSTOM:
        # the generating callable is not persistable; keep the kind marker only
        return RelevanceSpec(RelevanceKind.CUSTOM, custom_fn=lambda a, b: 0.0)
    return RelevanceSpec(kind, window_years=payload.get("window_years"))


def matrix_to_json(matrix: RelevanceMatrix) -> dict:
    doc = {
        "years": [int(y) for y in matrix.years],
        "values": [[float(v) for v in row] for row in matrix.values],
        "provenance": matrix.provenance,
    }
    spec = _spec_to_json(matrix.spec)
    if spec is not None:
        doc["spec"] = spec
    return doc


def matrix_from_json(doc) -> RelevanceMatrix:
    if not isinstance(doc, dict):
        raise MatrixFormatError("matrix document must be a JSON object")
    for fld in ("years", "values", "provenance"):
        if fld not in doc:
            raise MatrixFormatError(f"missing required field {fld!r}")
    try:
        return RelevanceMatrix(
            np.asarray(doc["years"], dtype=np.int64),
            np.asarray(doc["values"], dtype=np.float64),
            doc["provenance"],
            _spec_from_json(doc.get("spec")),
        )
    except (InvalidInputError, ValueError) as exc:
        raise MatrixFormatError(f"invalid matrix document: {exc}") from exc


def save_matrix(matrix: RelevanceMatrix, path) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(matrix), indent=2) + "\n")


def load_matrix(path) -> RelevanceMatrix:
    raw = Path(path).read_text()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return matrix_from_json(doc)
