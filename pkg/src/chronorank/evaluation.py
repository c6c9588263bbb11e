"""Shared evaluation path: embed, index, then score MAE and mAP.

The CLI ``eval`` subcommand and the service ``/metrics`` endpoint both call
into this module, so the two surfaces cannot drift apart.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .datastore import DocumentRecord
from .errors import InvalidInputError
from .index import DEFAULT_NEIGHBORS, IndexedDocument, RetrievalIndex, SOURCE_ORIGINAL
from .model import ProjectionModel, forward
from .ranking import mean_absolute_error, mean_average_precision


class EvalMetrics(NamedTuple):
    mae: float
    map: float
    n_queries: int

    def to_json(self) -> dict:
        return {"mae": self.mae, "map": self.map, "n_queries": self.n_queries}


def build_index(
    model: ProjectionModel,
    records: Sequence[DocumentRecord],
    source: str = SOURCE_ORIGINAL,
) -> RetrievalIndex:
    """Embed labeled records and index them."""
    labeled = [r for r in records if r.year is not None]
    if not labeled:
        raise InvalidInputError("no labeled records to index")
    embeddings = forward(model, np.asarray([r.features for r in labeled]))
    index = RetrievalIndex()
    index.add(
        IndexedDocument(r.doc_id, e, int(r.year), source)
        for r, e in zip(labeled, embeddings)
    )
    return index


def evaluate(
    model: ProjectionModel,
    index: RetrievalIndex,
    test_records: Sequence[DocumentRecord],
    k: int = DEFAULT_NEIGHBORS,
) -> EvalMetrics:
    """MAE of weighted k-NN year estimates plus same-year-relevance mAP.

    Every test record queries the full index. For mAP a hit is relevant iff
    its year label equals the query's; queries whose year appears nowhere in
    the index are skipped by the mAP mean (but still count toward MAE).
    """
    labeled = [r for r in test_records if r.year is not None]
    if not labeled:
        raise InvalidInputError("no labeled test records to evaluate")
    embeddings = forward(model, np.asarray([r.features for r in labeled]))
    neighbors = min(k, len(index))

    predictions = []
    rankings = []
    relevant_sets = []
    indexed_docs = index.documents()
    for record, embedding in zip(labeled, embeddings):
        predictions.append(index.estimate_year(embedding, k=neighbors).predicted_year)
        ranking = [hit.doc_id for hit in index.query(embedding, top_k=len(index))]
        rankings.append(ranking)
        relevant_sets.append({d.doc_id for d in indexed_docs if d.year == record.year})

    mae = mean_absolute_error(predictions, [float(r.year) for r in labeled])
    map_score = mean_average_precision(rankings, relevant_sets)
    return EvalMetrics(mae, map_score, len(labeled))
