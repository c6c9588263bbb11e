"""Date-ordered document embeddings with a differentiable ranking objective.

Train a projection so that cosine similarity in the embedding space tracks
year proximity, retrieve labeled documents for any query vector, estimate
years by weighted k-NN, and steer retraining through an editable relevance
matrix.
"""

from .datastore import (
    DatasetFormat,
    DocumentRecord,
    Split,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .evaluation import EvalMetrics, build_index, evaluate
from .index import (
    IndexedDocument,
    RankedHit,
    RetrievalIndex,
    YearEstimate,
    pca_project,
    projection_points,
)
from .model import (
    ProjectionModel,
    TrainingConfig,
    TrainingReport,
    batch_loss,
    cosine_matrix,
    forward,
    init_model,
    load_model,
    model_version,
    save_model,
    train,
)
from .ranking import (
    LossConfig,
    RelevanceKind,
    RelevanceSpec,
    ScoredList,
    exact_dcg,
    ideal_dcg,
    mean_absolute_error,
    mean_average_precision,
    relevance_log,
    relevance_thresholded,
    sigmoid_temp,
    smooth_dcg,
    smooth_ndcg,
    smooth_ndcg_grad,
)
from .relevance import (
    RelevanceMatrix,
    boost_region,
    build_matrix,
    load_matrix,
    row_for_query,
    save_matrix,
    set_cell,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetFormat",
    "DocumentRecord",
    "EvalMetrics",
    "IndexedDocument",
    "LossConfig",
    "ProjectionModel",
    "RankedHit",
    "RelevanceKind",
    "RelevanceMatrix",
    "RelevanceSpec",
    "RetrievalIndex",
    "ScoredList",
    "Split",
    "SyntheticSpec",
    "TrainingConfig",
    "TrainingReport",
    "YearEstimate",
    "batch_loss",
    "boost_region",
    "build_index",
    "build_matrix",
    "cosine_matrix",
    "evaluate",
    "exact_dcg",
    "forward",
    "generate_synthetic",
    "ideal_dcg",
    "init_model",
    "load_dataset",
    "load_matrix",
    "load_model",
    "mean_absolute_error",
    "mean_average_precision",
    "model_version",
    "pca_project",
    "projection_points",
    "relevance_log",
    "relevance_thresholded",
    "row_for_query",
    "save_dataset",
    "save_matrix",
    "save_model",
    "set_cell",
    "sigmoid_temp",
    "smooth_dcg",
    "smooth_ndcg",
    "smooth_ndcg_grad",
    "split_dataset",
    "train",
]
