"""Exact cosine-similarity retrieval over labeled embeddings.

The index holds unit-norm embeddings with year labels, answers top-k queries
by exhaustive scan, estimates a year for any embedding by weighted k-NN, and
exposes per-year cluster centers plus a 2-D PCA projection for inspection.

Writes are serialized and atomically visible; reads operate on an immutable
snapshot of the document table, so concurrent queries never see a half
mutation.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateVarianceError,
    EmptyIndexError,
    InvalidInputError,
    InvalidParameterError,
)

SOURCE_ORIGINAL = "original"
SOURCE_USER_FEEDBACK = "user_feedback"

_UNIT_TOL = 1e-6

DEFAULT_NEIGHBORS = 10


@dataclass(frozen=True, eq=False)
class IndexedDocument:
    doc_id: str
    embedding: np.ndarray
    year: int
    source: str = SOURCE_ORIGINAL

    def __post_init__(self):
        embedding = np.asarray(self.embedding, dtype=np.float64)
        if embedding.ndim != 1:
            raise InvalidInputError(f"{self.doc_id}: embedding must be 1-D")
        if not np.all(np.isfinite(embedding)):
            raise InvalidInputError(f"{self.doc_id}: embedding must be finite")
        if abs(np.linalg.norm(embedding) - 1.0) > _UNIT_TOL:
            raise InvalidInputError(f"{self.doc_id}: embedding must be unit-norm")
        if self.source not in (SOURCE_ORIGINAL, SOURCE_USER_FEEDBACK):
            raise InvalidInputError(f"{self.doc_id}: unknown source {self.source!r}")
        object.__setattr__(self, "embedding", embedding)
        embedding.setflags(write=False)


class RankedHit(NamedTuple):
    doc_id: str
    similarity: float
    year: int


class YearEstimate(NamedTuple):
    predicted_year: float
    neighbor_ids: tuple[str, ...]
    weights: tuple[float, ...]


class AddResult(NamedTuple):
    count: int  # index size after the add
    replaced: tuple[str, ...]  # doc_ids that were upserted over


class ClusterCenters(NamedTuple):
    centers: dict[int, np.ndarray]
    excluded_years: list[int]


class RetrievalIndex:
    def __init__(self, documents: Iterable[IndexedDocument] = ()):
        self._lock = threading.Lock()
        self._docs: dict[str, IndexedDocument] = {}
        if documents:
            self.add(documents)

    def __len__(self) -> int:
        return len(self._docs)

    def get(self, doc_id: str) -> IndexedDocument | None:
        return self._docs.get(doc_id)

    def documents(self) -> list[IndexedDocument]:
        return list(self._docs.values())

    def add(self, documents: Iterable[IndexedDocument]) -> AddResult:
        """Insert documents; an existing doc_id is replaced and flagged."""
        documents = list(documents)
        seen = [d.doc_id for d in documents]
        if len(set(seen)) != len(seen):
            raise InvalidInputError("duplicate doc_ids within one add() call")
        with self._lock:
            table = dict(self._docs)
            replaced = tuple(d.doc_id for d in documents if d.doc_id in table)
            for doc in documents:
                table[doc.doc_id] = doc
            self._docs = table  # atomically swap the snapshot
        return AddResult(len(table), replaced)

    def _snapshot(self) -> list[IndexedDocument]:
        docs = self._docs
        if not docs:
            raise EmptyIndexError("the index is empty")
        return list(docs.values())

    def _ranked(self, embedding: np.ndarray) -> list[RankedHit]:
        docs = self._snapshot()
        query = np.asarray(embedding, dtype=np.float64)
        if query.shape != docs[0].embedding.shape:
            raise InvalidInputError(
                f"query dimension {query.shape} != index dimension {docs[0].embedding.shape}"
            )
        sims = np.stack([d.embedding for d in docs]) @ query
        order = sorted(range(len(docs)), key=lambda i: (-sims[i], docs[i].doc_id))
        return [RankedHit(docs[i].doc_id, float(sims[i]), docs[i].year) for i in order]

    def query(self, embedding: np.ndarray, top_k: int) -> list[RankedHit]:
        """Top-k hits by exhaustive cosine scan; ties break by ascending doc_id."""
        if top_k < 1:
            raise InvalidParameterError(f"top_k must be >= 1, got {top_k}")
        return self._ranked(embedding)[:top_k]

    def estimate_year(
        self,
        embedding: np.ndarray,
        k: int = DEFAULT_NEIGHBORS,
        weighting: str = "similarity",
        softmax_beta: float = 10.0,
    ) -> YearEstimate:
        """Weighted k-NN vote over neighbor years.

        ``similarity`` weighting clamps negative similarities to zero (falling
        back to uniform weights if every similarity is nonpositive) so the
        prediction stays inside the neighbors' year range; ``softmax`` weights
        by exp(beta * similarity).
        """
        if k < 1:
            raise InvalidParameterError(f"k must be >= 1, got {k}")
        if k > len(self._docs):
            raise InvalidParameterError(f"k={k} exceeds index size {len(self._docs)}")
        if weighting not in ("similarity", "softmax"):
            raise InvalidParameterError(f"unknown weighting {weighting!r}")
        neighbors = self._ranked(embedding)[:k]
        sims = np.asarray([hit.similarity for hit in neighbors])
        if weighting == "similarity":
            raw = np.maximum(sims, 0.0)
            if raw.sum() <= 0.0:
                raw = np.ones_like(raw)
        else:
            raw = np.exp(softmax_beta * (sims - sims.max()))
        weights = raw / raw.sum()
        years = np.asarray([hit.year for hit in neighbors], dtype=np.float64)
        # anchor at the minimum year so unanimous neighbors predict exactly,
        # and clamp so rounding can never leave the neighbors' year range
        anchor = years.min()
        predicted = float(np.clip(anchor + weights @ (years - anchor), anchor, years.max()))
        return YearEstimate(
            predicted,
            tuple(hit.doc_id for hit in neighbors),
            tuple(float(w) for w in weights),
        )

    def cluster_centers(self) -> ClusterCenters:
        """Per-year mean embedding, re-normalized; degenerate years excluded."""
        docs = self._snapshot()
        by_year: dict[int, list[np.ndarray]] = {}
        for doc in docs:
            by_year.setdefault(doc.year, []).append(doc.embedding)
        centers: dict[int, np.ndarray] = {}
        excluded: list[int] = []
        for year in sorted(by_year):
            mean = np.mean(by_year[year], axis=0)
            norm = np.linalg.norm(mean)
            if norm < 1e-12:
                excluded.append(year)
            else:
                centers[year] = mean / norm
        return ClusterCenters(centers, excluded)

    def save(self, path) -> None:
        with Path(path).open("w") as handle:
            for doc in self.documents():
                handle.write(
                    json.dumps(
                        {
                            "doc_id": doc.doc_id,
                            "embedding": [float(v) for v in doc.embedding],
                            "year": doc.year,
                            "source": doc.source,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load(cls, path) -> "RetrievalIndex":
        index = cls()
        documents = []
        with Path(path).open() as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                    documents.append(
                        IndexedDocument(
                            doc["doc_id"],
                            np.asarray(doc["embedding"]),
                            int(doc["year"]),
                            doc.get("source", SOURCE_ORIGINAL),
                        )
                    )
                except (ValueError, KeyError, TypeError) as exc:
                    raise InvalidInputError(f"{path}: line {line_no}: {exc}") from exc
        if documents:
            index.add(documents)
        return index


def projection_points(index: RetrievalIndex) -> tuple[list[tuple[int, float, float]], list[int]]:
    """Per-year cluster centers projected to the 2-D principal plane.

    A single-year index degenerates to one point at the origin (its center is
    the whole dataset mean). Returns (points, excluded_years) with points
    sorted by year.
    """
    centers = index.cluster_centers()
    years = sorted(centers.centers)
    if len(years) == 1:
        return [(years[0], 0.0, 0.0)], centers.excluded_years
    coords = pca_project(np.stack([centers.centers[y] for y in years]))
    points = [(year, float(x), float(y)) for year, (x, y) in zip(years, coords)]
    return points, centers.excluded_years


def pca_project(vectors: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Project onto the top-2 principal directions of the centered data.

    Output columns are ordered by non-increasing variance. Each axis's sign
    is fixed by making its largest-magnitude loading positive, so repeated
    runs on the same data agree exactly.
    """
    data = np.asarray(vectors, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise InvalidInputError("need at least 2 vectors to project")
    if data.shape[1] < 2:
        raise InvalidInputError("vectors must have dimension >= 2")
    centered = data - data.mean(axis=0)
    covariance = (centered.T @ centered) / (data.shape[0] - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    if eigenvalues[-1] < 1e-15:
        raise DegenerateVarianceError("all vectors are identical")
    axes = eigenvectors[:, [-1, -2]]
    for column in range(2):
        axis = axes[:, column]
        if axis[np.argmax(np.abs(axis))] < 0:
            axes[:, column] = -axis
    return centered @ axes
