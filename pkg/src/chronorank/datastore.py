"""Dataset ingestion, synthetic benchmark generation, splits, and the
append-only feedback journal.

Feature vectors are the ingestion boundary: documents arrive as precomputed
numeric vectors, never as images. Two on-disk dataset formats are supported:

* CSV with header ``doc_id,year,f0..f{F-1}`` (empty year = unlabeled)
* JSON-lines mirroring DocumentRecord fields

The feedback journal is JSON-lines and append-only; replaying it applies
last-write-wins per doc_id.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DatasetValidationError, InvalidInputError, InvalidParameterError

logger = logging.getLogger(__name__)


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"
    UNLABELED = "unlabeled"


class DatasetFormat(enum.Enum):
    CSV_FEATURES = "csv"
    JSON_LINES = "jsonl"


@dataclass(frozen=True, eq=False)
class DocumentRecord:
    doc_id: str
    features: np.ndarray
    year: int | None
    split: Split = Split.TRAIN

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 1:
            raise InvalidInputError(f"{self.doc_id}: features must be a 1-D vector")
        if not np.all(np.isfinite(features)):
            raise InvalidInputError(f"{self.doc_id}: features must be finite")
        if (self.year is None) != (self.split is Split.UNLABELED):
            raise InvalidInputError(
                f"{self.doc_id}: year must be present exactly when the split is labeled"
            )
        object.__setattr__(self, "features", features)
        features.setflags(write=False)


@dataclass(frozen=True)
class SyntheticSpec:
    year_lo: int
    year_hi: int
    docs_per_year: int
    feature_dim: int
    noise_sigma: float
    mixing_seed: int

    def __post_init__(self):
        if self.year_lo >= self.year_hi:
            raise InvalidParameterError("year_lo must be < year_hi")
        if self.docs_per_year < 1:
            raise InvalidParameterError("docs_per_year must be >= 1")
        if self.feature_dim < 4:
            raise InvalidParameterError("feature_dim must be >= 4")
        if self.noise_sigma < 0:
            raise InvalidParameterError("noise_sigma must be >= 0")

    def to_json(self) -> dict:
        return {
            "year_lo": self.year_lo,
            "year_hi": self.year_hi,
            "docs_per_year": self.docs_per_year,
            "feature_dim": self.feature_dim,
            "noise_sigma": self.noise_sigma,
            "mixing_seed": self.mixing_seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        return cls(**{k: doc[k] for k in (
            "year_lo", "year_hi", "docs_per_year", "feature_dim", "noise_sigma", "mixing_seed"
        )})


class LoadResult(NamedTuple):
    records: list[DocumentRecord]
    errors: list[str]


class SplitResult(NamedTuple):
    train: list[DocumentRecord]
    test: list[DocumentRecord]
    singleton_years: list[int]


def _record_from_row(doc_id: str, year_text: str, feature_texts: Sequence[str]) -> DocumentRecord:
    features = np.asarray([float(v) for v in feature_texts], dtype=np.float64)
    if year_text == "":
        return DocumentRecord(doc_id, features, None, Split.UNLABELED)
    return DocumentRecord(doc_id, features, int(year_text), Split.TRAIN)


def load_dataset(path, format: DatasetFormat, lenient: bool = False) -> LoadResult:
    """Parse and validate a dataset file.

    Per-record failures are collected with their line numbers; unless
    ``lenient`` is set, any failure rejects the whole file.
    """
    path = Path(path)
    records: list[DocumentRecord] = []
    errors: list[str] = []
    feature_dim: int | None = None

    def admit(line_no: int, build):
        nonlocal feature_dim
        try:
            record = build()
            if feature_dim is None:
                feature_dim = record.features.size
            elif record.features.size != feature_dim:
                raise InvalidInputError(
                    f"feature dimension {record.features.size} != first row's {feature_dim}"
                )
            records.append(record)
        except (InvalidInputError, ValueError, KeyError, TypeError) as exc:
            errors.append(f"line {line_no}: {exc}")

    if format is DatasetFormat.CSV_FEATURES:
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or header[:2] != ["doc_id", "year"]:
                raise DatasetValidationError(["line 1: header must start with doc_id,year,f0.."])
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                admit(line_no, lambda row=row: _record_from_row(row[0], row[1].strip(), row[2:]))
    else:
        with path.open() as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue

                def build(line=line):
                    doc = json.loads(line)
                    year = doc.get("year")
                    split = Split(doc.get("split", "unlabeled" if year is None else "train"))
                    return DocumentRecord(doc["doc_id"], np.asarray(doc["features"]), year, split)

                admit(line_no, build)

    if errors and not lenient:
        raise DatasetValidationError(errors)
    return LoadResult(records, errors)


def save_dataset(records: Iterable[DocumentRecord], path, format: DatasetFormat) -> None:
    path = Path(path)
    records = list(records)
    if format is DatasetFormat.CSV_FEATURES:
        dim = records[0].features.size if records else 0
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["doc_id", "year"] + [f"f{i}" for i in range(dim)])
            for record in records:
                year = "" if record.year is None else str(record.year)
                writer.writerow([record.doc_id, year] + [repr(float(v)) for v in record.features])
    else:
        with path.open("w") as handle:
            for record in records:
                handle.write(json.dumps(record_to_json(record)) + "\n")


def record_to_json(record: DocumentRecord) -> dict:
    return {
        "doc_id": record.doc_id,
        "features": [float(v) for v in record.features],
        "year": record.year,
        "split": record.split.value,
    }


# Signal amplitudes of the synthetic year code. The ramp carries the global
# chronology; the half-turn sine/cosine pair keeps the curve at a constant
# distance from the origin (so unit-normalizing embeddings stays benign) and
# adds local detail. The 10:3 ratio keeps the first principal direction of
# the clean signal monotone in year.
RAMP_GAIN = 10.0
WAVE_GAIN = 3.0


def generate_synthetic(spec: SyntheticSpec) -> list[DocumentRecord]:
    """Deterministic year-coded benchmark: features = mix @ g(year) + noise.

    g(year) stacks a normalized year ramp, a half-turn sine/cosine pair, and
    the squared ramp, zero-padded to the feature dimension, then mixed by a
    fixed random orthogonal matrix. Identical specs yield identical bits.
    """
    rng = np.random.default_rng(spec.mixing_seed)
    gaussian = rng.normal(size=(spec.feature_dim, spec.feature_dim))
    mixing, _ = np.linalg.qr(gaussian)

    span = spec.year_hi - spec.year_lo
    omega = math.pi / span
    records = []
    for year in range(spec.year_lo, spec.year_hi + 1):
        ramp = (year - spec.year_lo) / span
        signal = np.zeros(spec.feature_dim)
        signal[:4] = (
            RAMP_GAIN * ramp,
            WAVE_GAIN * math.sin(omega * year),
            WAVE_GAIN * math.cos(omega * year),
            RAMP_GAIN * ramp * ramp,
        )
        base = mixing @ signal
        for copy in range(spec.docs_per_year):
            noise = rng.normal(0.0, spec.noise_sigma, spec.feature_dim) if spec.noise_sigma else 0.0
            records.append(
                DocumentRecord(f"syn-{year}-{copy:03d}", base + noise, year, Split.TRAIN)
            )
    return records


def split_dataset(
    records: Sequence[DocumentRecord], test_fraction: float, seed: int
) -> SplitResult:
    """Stratified-by-year split; every year with >= 2 records reaches both sides.

    Years holding a single record go to the train side and are reported in
    ``singleton_years``.
    """
    if not (0.0 < test_fraction < 1.0):
        raise InvalidParameterError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labeled = [r for r in records if r.year is not None]
    if len(labeled) < 2:
        raise InvalidInputError("need at least 2 labeled records to split")

    by_year: dict[int, list[DocumentRecord]] = {}
    for record in labeled:
        by_year.setdefault(int(record.year), []).append(record)

    rng = np.random.default_rng(seed)
    train: list[DocumentRecord] = []
    test: list[DocumentRecord] = []
    singletons: list[int] = []
    for year in sorted(by_year):
        group = by_year[year]
        if len(group) == 1:
            singletons.append(year)
            train.append(replace(group[0], split=Split.TRAIN))
            continue
        order = rng.permutation(len(group))
        n_test = min(len(group) - 1, max(1, round(len(group) * test_fraction)))
        chosen = set(order[:n_test].tolist())
        for position, record in enumerate(group):
            if position in chosen:
                test.append(replace(record, split=Split.TEST))
            else:
                train.append(replace(record, split=Split.TRAIN))
    return SplitResult(train, test, singletons)


def feedback_append(store_path, records: Sequence[DocumentRecord]) -> int:
    """Append labeled records to the journal; returns the distinct-doc count."""
    for record in records:
        if record.year is None:
            raise InvalidInputError(f"{record.doc_id}: feedback records must carry a year")
    path = Path(store_path)
    with path.open("a") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "doc_id": record.doc_id,
                        "features": [float(v) for v in record.features],
                        "year": int(record.year),
                    }
                )
                + "\n"
            )
    return len(feedback_load(store_path))


def feedback_load(store_path) -> list[DocumentRecord]:
    """Replay the journal, last write winning per doc_id.

    A corrupt trailing line is tolerated: the valid prefix is returned and a
    warning logged. Corruption before the end still fails the load.
    """
    path = Path(store_path)
    if not path.exists():
        return []
    lines = path.read_text().splitlines()
    latest: dict[str, DocumentRecord] = {}
    order: list[str] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            record = DocumentRecord(
                doc["doc_id"], np.asarray(doc["features"]), int(doc["year"]), Split.TRAIN
            )
        except (ValueError, KeyError, TypeError) as exc:
            if line_no == len(lines):
                logger.warning("feedback journal %s: dropping corrupt trailing line: %s", path, exc)
                break
            raise DatasetValidationError([f"line {line_no}: {exc}"]) from exc
        if record.doc_id not in latest:
            order.append(record.doc_id)
        latest[record.doc_id] = record
    return [latest[doc_id] for doc_id in order]
