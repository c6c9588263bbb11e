"""Trainable projection from feature vectors to unit-norm embeddings.

A small feed-forward head: affine layers with ReLU or tanh on the hidden
layers, then an affine output layer whose rows are L2-normalized. Training
runs gradient ASCENT on the batch-mean smooth-nDCG: each batch element acts
as a query over the rest of the batch, scored by cosine similarity and graded
by the relevance matrix row for its year.

All gradients are computed manually (closed-form backprop); nothing here
depends on an autodiff framework.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .datastore import DocumentRecord
from .errors import (
    DegenerateEmbeddingError,
    InvalidInputError,
    InvalidParameterError,
    TrainingDivergedError,
)
from .ranking import LossConfig, ScoredList, smooth_ndcg, smooth_ndcg_grad
from .relevance import RelevanceMatrix

CHECKPOINT_FORMAT_VERSION = 1

ACTIVATIONS = ("relu", "tanh")

_NORM_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ProjectionModel:
    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # per layer, shape (out, in)
    biases: tuple[np.ndarray, ...]  # per layer, shape (out,)
    activation: str
    init_seed: int

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise InvalidParameterError(f"layer_dims must be >= 2 positive ints, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise InvalidParameterError(f"activation must be one of {ACTIVATIONS}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise InvalidInputError("one weight matrix and bias vector per layer required")
        for level, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[level + 1], dims[level]) or b.shape != (dims[level + 1],):
                raise InvalidInputError(
                    f"layer {level} shapes {w.shape}/{b.shape} inconsistent with dims {dims}"
                )
        object.__setattr__(self, "layer_dims", dims)

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def embedding_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float
    batch_size: int = 32
    max_iterations: int = 100
    seed: int = 0
    optimizer: str = "sgd"  # "sgd" or "sgd_momentum"
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidParameterError("learning_rate must be >= 0")
        if self.batch_size < 2:
            raise InvalidParameterError("batch_size must be >= 2")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if self.optimizer not in ("sgd", "sgd_momentum"):
            raise InvalidParameterError(f"unknown optimizer {self.optimizer!r}")
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidParameterError("momentum must be in [0, 1)")


@dataclass
class TrainingReport:
    """One loss and one wall-clock entry per completed iteration.

    Wall-clock timings are kept in memory only; serialization drops them so
    that identically seeded runs produce byte-identical report files.
    """

    losses: list[float] = field(default_factory=list)
    wall_clock_seconds: list[float] = field(default_factory=list)
    final_eval: dict | None = None

    def to_json(self) -> dict:
        doc = {"iterations": len(self.losses), "losses": self.losses}
        if self.final_eval is not None:
            doc["final_eval"] = self.final_eval
        return doc


def init_model(layer_dims: Sequence[int], activation: str = "relu", seed: int = 0) -> ProjectionModel:
    """Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidParameterError(f"layer_dims must be >= 2 positive ints, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ProjectionModel(dims, tuple(weights), tuple(biases), activation, int(seed))


@dataclass
class _ForwardTrace:
    inputs: np.ndarray
    hidden_pre: list[np.ndarray]
    hidden_post: list[np.ndarray]
    pre_norm: np.ndarray
    norms: np.ndarray
    embeddings: np.ndarray


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(pre: np.ndarray, post: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (pre > 0).astype(np.float64)
    return 1.0 - post * post


def _forward_trace(model: ProjectionModel, features: np.ndarray) -> _ForwardTrace:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise InvalidInputError(
            f"features must be (n, {model.feature_dim}), got {x.shape}"
        )
    hidden_pre, hidden_post = [], []
    a = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w.T + b
        a = _activate(z, model.activation)
        hidden_pre.append(z)
        hidden_post.append(a)
    pre_norm = a @ model.weights[-1].T + model.biases[-1]
    norms = np.linalg.norm(pre_norm, axis=1)
    degenerate = np.flatnonzero(norms < _NORM_FLOOR)
    if degenerate.size:
        raise DegenerateEmbeddingError(int(degenerate[0]))
    embeddings = pre_norm / norms[:, None]
    return _ForwardTrace(x, hidden_pre, hidden_post, pre_norm, norms, embeddings)


def forward(model: ProjectionModel, features) -> np.ndarray:
    """Embed a batch (or a single vector) of features; rows have unit norm."""
    return _forward_trace(model, features).embeddings


def cosine_matrix(embeddings: np.ndarray) -> np.ndarray:
    """All-vs-all cosine similarities of unit-norm rows."""
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise InvalidInputError("embeddings must be a 2-D batch")
    norms = np.linalg.norm(e, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise InvalidInputError("embeddings must be unit-norm within 1e-6")
    unit = e / norms[:, None]
    return unit @ unit.T


def _normalize_rows(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(e, axis=1)
    if np.any(norms < _NORM_FLOOR):
        raise InvalidInputError("zero-norm embedding row")
    return e / norms[:, None], norms


def batch_loss(
    embeddings: np.ndarray,
    years: Sequence[int],
    matrix: RelevanceMatrix,
    cfg: LossConfig,
) -> tuple[float, np.ndarray]:
    """Mean smooth-nDCG over in-batch queries, plus its embedding gradient.

    Every batch element queries the remaining elements; scores are true
    cosine similarities (rows are normalized here, so the gradient includes
    the cosine Jacobian and finite differences on raw embeddings agree).
    """
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 2:
        raise InvalidInputError("batch_loss needs a 2-D batch of >= 2 embeddings")
    years = list(years)
    if len(years) != e.shape[0]:
        raise InvalidInputError("one year per embedding required")
    year_cols = np.asarray([matrix.year_index(int(y)) for y in years])

    unit, norms = _normalize_rows(e)
    scores_all = unit @ unit.T
    n = e.shape[0]
    everyone = np.arange(n)

    loss_total = 0.0
    grad_unit = np.zeros_like(unit)
    for q in range(n):
        others = everyone[everyone != q]
        scored = ScoredList(scores_all[q, others], matrix.values[year_cols[q], year_cols[others]])
        loss_total += smooth_ndcg(scored, cfg)
        g = smooth_ndcg_grad(scored, cfg)
        # s_i = <u_q, u_i>: distribute ds onto both unit rows
        grad_unit[q] += g @ unit[others]
        grad_unit[others] += np.outer(g, unit[q])

    loss = loss_total / n
    grad_unit /= n
    # back through the row normalization u = e / |e|
    inner = np.sum(grad_unit * unit, axis=1, keepdims=True)
    grad = (grad_unit - unit * inner) / norms[:, None]
    return loss, grad


def _backprop(
    model: ProjectionModel, trace: _ForwardTrace, grad_embeddings: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the scalar loss wrt every weight matrix and bias vector."""
    inner = np.sum(grad_embeddings * trace.embeddings, axis=1, keepdims=True)
    delta = (grad_embeddings - trace.embeddings * inner) / trace.norms[:, None]

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for level in range(len(model.weights) - 1, -1, -1):
        below = trace.hidden_post[level - 1] if level > 0 else trace.inputs
        grads.append((delta.T @ below, delta.sum(axis=0)))
        if level > 0:
            upstream = delta @ model.weights[level]
            delta = upstream * _activation_grad(
                trace.hidden_pre[level - 1], trace.hidden_post[level - 1], model.activation
            )
    grads.reverse()
    return grads


def loss_and_weight_gradients(
    model: ProjectionModel,
    features: np.ndarray,
    years: Sequence[int],
    matrix: RelevanceMatrix,
    cfg: LossConfig,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Forward + batch loss + full backprop in one call."""
    trace = _forward_trace(model, features)
    loss, grad_embeddings = batch_loss(trace.embeddings, years, matrix, cfg)
    return loss, _backprop(model, trace, grad_embeddings)


def _batch_iterator(n: int, batch_size: int, rng: np.random.Generator):
    """Without-replacement batches, reshuffled each epoch, partial tails dropped."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield order[start : start + batch_size]


def train(
    model: ProjectionModel,
    records: Sequence[DocumentRecord],
    matrix: RelevanceMatrix,
    tcfg: TrainingConfig,
    lcfg: LossConfig,
    on_iteration: Callable[[int, float], None] | None = None,
) -> tuple[ProjectionModel, TrainingReport]:
    """Gradient ascent on the batch-mean smooth-nDCG for max_iterations steps.

    Deterministic under a fixed seed: batch order, updates, and the returned
    report depend only on the inputs. Raises TrainingDivergedError if the
    loss leaves the finite range, carrying the completed-iteration report.
    """
    labeled = [r for r in records if r.year is not None]
    if len(labeled) < tcfg.batch_size:
        raise InvalidInputError(
            f"dataset has {len(labeled)} labeled records, need >= batch_size {tcfg.batch_size}"
        )
    features = np.asarray([r.features for r in labeled], dtype=np.float64)
    years = [int(r.year) for r in labeled]
    for y in set(years):
        matrix.year_index(y)  # fail fast on vocabulary gaps

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    velocity = [
        (np.zeros_like(w), np.zeros_like(b)) for w, b in zip(weights, biases)
    ]
    current = ProjectionModel(
        model.layer_dims, tuple(weights), tuple(biases), model.activation, model.init_seed
    )

    rng = np.random.default_rng(tcfg.seed)
    batches = _batch_iterator(len(labeled), tcfg.batch_size, rng)
    report = TrainingReport()

    for iteration in range(tcfg.max_iterations):
        started = time.perf_counter()
        batch = next(batches)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_weight_gradients(
                    current, features[batch], [years[i] for i in batch], matrix, lcfg
                )
        except (InvalidInputError, DegenerateEmbeddingError) as exc:
            if iteration == 0:
                raise  # genuine input problem, not a diverged run
            raise TrainingDivergedError(iteration, report) from exc
        if not np.isfinite(loss):
            raise TrainingDivergedError(iteration, report)
        for level, (gw, gb) in enumerate(grads):
            if tcfg.optimizer == "sgd_momentum":
                vw, vb = velocity[level]
                vw *= tcfg.momentum
                vw += gw
                vb *= tcfg.momentum
                vb += gb
                gw, gb = vw, vb
            weights[level] += tcfg.learning_rate * gw
            biases[level] += tcfg.learning_rate * gb
        if not all(np.all(np.isfinite(w)) for w in weights):
            report.losses.append(float(loss))
            raise TrainingDivergedError(iteration, report)
        report.losses.append(float(loss))
        report.wall_clock_seconds.append(time.perf_counter() - started)
        if on_iteration is not None:
            on_iteration(iteration, float(loss))

    return current, report


def model_to_json(model: ProjectionModel) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layer_dims": list(model.layer_dims),
        "activation": model.activation,
        "seed": model.init_seed,
        "weights": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    }


def model_from_json(doc: dict) -> ProjectionModel:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise InvalidInputError(
            f"unsupported checkpoint format_version {doc.get('format_version')!r}"
        )
    dims = tuple(int(d) for d in doc["layer_dims"])
    weights = tuple(np.asarray(layer["w"], dtype=np.float64) for layer in doc["weights"])
    biases = tuple(np.asarray(layer["b"], dtype=np.float64) for layer in doc["weights"])
    return ProjectionModel(dims, weights, biases, doc["activation"], int(doc["seed"]))


def checkpoint_bytes(model: ProjectionModel) -> bytes:
    """Canonical serialized form; identical models map to identical bytes."""
    return (
        json.dumps(model_to_json(model), sort_keys=True, separators=(",", ":")) + "\n"
    ).encode()


def model_version(model: ProjectionModel) -> str:
    return hashlib.sha256(checkpoint_bytes(model)).hexdigest()[:12]


def save_model(model: ProjectionModel, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(model))


def load_model(path) -> ProjectionModel:
    return model_from_json(json.loads(Path(path).read_text()))
