"""HTTP facade for the human-in-the-loop workflow.

Endpoints: query + year estimation, label feedback, relevance-matrix
inspection and editing (versioned), asynchronous retraining with an atomic
model/index swap, cluster-center projection, and held-out metrics.

Concurrency contract: reads never take the state lock; they grab the current
(model, index, version) snapshot reference once and work off it. Mutations
(feedback inserts, matrix edits, the post-training swap) serialize on the
lock and replace state atomically, so a request observes exactly one model
version end to end. At most one retrain job is live at a time.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field as dataclass_field
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import datastore
from .config import DEFAULTS
from .datastore import DocumentRecord, Split, feedback_append, feedback_load
from .errors import ChronorankError, InvalidInputError
from .evaluation import build_index, evaluate
from .index import (
    IndexedDocument,
    RetrievalIndex,
    SOURCE_ORIGINAL,
    SOURCE_USER_FEEDBACK,
    projection_points,
)
from .model import (
    ProjectionModel,
    TrainingConfig,
    forward,
    init_model,
    model_version,
    train,
)
from .ranking import LossConfig
from .relevance import (
    RelevanceMatrix,
    boost_region,
    build_matrix,
    matrix_from_json,
    matrix_to_json,
    set_cell,
)

JOB_QUEUED = "queued"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"

_TERMINAL = (JOB_DONE, JOB_FAILED)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details: Any = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details

    def response(self) -> JSONResponse:
        error: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details is not None:
            error["details"] = self.details
        return JSONResponse(status_code=self.status, content={"error": error})


@dataclass
class Snapshot:
    model: ProjectionModel | None = None
    index: RetrievalIndex | None = None
    version: str | None = None


@dataclass
class RetrainJob:
    job_id: str
    matrix_version: str
    config: dict[str, Any]
    state: str = JOB_QUEUED
    iteration: int | None = None
    loss: float | None = None
    report: dict | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "job_id": self.job_id,
            "state": self.state,
            "matrix_version": self.matrix_version,
            "config": self.config,
        }
        if self.state == JOB_RUNNING:
            doc["iteration"] = self.iteration
            doc["loss"] = self.loss
        if self.state == JOB_DONE:
            doc["report"] = self.report
        if self.state == JOB_FAILED:
            doc["reason"] = self.reason
        return doc


@dataclass
class ServiceState:
    config: dict[str, Any]
    snapshot: Snapshot = dataclass_field(default_factory=Snapshot)
    matrices: dict[str, RelevanceMatrix] = dataclass_field(default_factory=dict)
    matrix_order: list[str] = dataclass_field(default_factory=list)
    train_records: list[DocumentRecord] = dataclass_field(default_factory=list)
    test_records: list[DocumentRecord] = dataclass_field(default_factory=list)
    documents: dict[str, DocumentRecord] = dataclass_field(default_factory=dict)
    feedback_path: str | None = None
    jobs: dict[str, RetrainJob] = dataclass_field(default_factory=dict)
    lock: threading.Lock = dataclass_field(default_factory=threading.Lock)
    _counters: dict[str, int] = dataclass_field(default_factory=dict)

    def next_id(self, prefix: str) -> str:
        n = self._counters.get(prefix, 0) + 1
        self._counters[prefix] = n
        return f"{prefix}-{n:04d}"

    def add_matrix(self, matrix: RelevanceMatrix) -> str:
        version = self.next_id("rm")
        self.matrices[version] = matrix
        self.matrix_order.append(version)
        return version

    @property
    def current_matrix_version(self) -> str | None:
        return self.matrix_order[-1] if self.matrix_order else None


def state_from_objects(
    model: ProjectionModel | None,
    index: RetrievalIndex | None,
    matrix: RelevanceMatrix,
    train_records,
    test_records=(),
    feedback_path=None,
    config: dict[str, Any] | None = None,
) -> ServiceState:
    merged = dict(DEFAULTS)
    merged.update(config or {})
    state = ServiceState(config=merged)
    state.add_matrix(matrix)
    state.train_records = list(train_records)
    state.test_records = list(test_records)
    state.documents = {r.doc_id: r for r in state.train_records}
    state.feedback_path = str(feedback_path) if feedback_path else None
    if state.feedback_path:
        for record in feedback_load(state.feedback_path):
            state.documents[record.doc_id] = record
    if model is not None:
        state.snapshot = Snapshot(model, index, model_version(model))
    return state


class QueryRequest(BaseModel):
    features: list[float] | None = None
    doc_id: str | None = None
    top_k: int | None = None
    k_estimate: int | None = None


class FeedbackRequest(BaseModel):
    doc_id: str
    features: list[float]
    year: int


class RetrainRequest(BaseModel):
    matrix_version: str | None = None
    learning_rate: float | None = None
    batch_size: int | None = None
    iterations: int | None = None
    temperature: float | None = None
    seed: int | None = None
    init_seed: int | None = None


def _require_snapshot(state: ServiceState) -> Snapshot:
    snap = state.snapshot
    if snap.model is None or snap.index is None or len(snap.index) == 0:
        raise ApiError(409, "no_model", "no trained model/index is being served yet")
    return snap


def _projection_points(snapshot: Snapshot) -> dict:
    points, excluded = projection_points(snapshot.index)
    return {
        "points": [{"year": year, "x": x, "y": y} for year, x, y in points],
        "excluded_years": excluded,
        "model_version": snapshot.version,
    }


def _run_retrain_job(state: ServiceState, job: RetrainJob) -> None:
    try:
        job.state = JOB_RUNNING
        matrix = state.matrices[job.matrix_version]
        cfg = job.config
        records = list(state.train_records)
        if state.feedback_path:
            records.extend(feedback_load(state.feedback_path))

        def progress(iteration: int, loss: float) -> None:
            job.iteration = iteration
            job.loss = loss

        base = init_model(
            cfg["layer_dims"], cfg["activation"], seed=cfg["init_seed"]
        )
        trained, report = train(
            base,
            records,
            matrix,
            TrainingConfig(
                learning_rate=cfg["learning_rate"],
                batch_size=cfg["batch_size"],
                max_iterations=cfg["iterations"],
                seed=cfg["seed"],
            ),
            LossConfig(temperature=cfg["temperature"]),
            on_iteration=progress,
        )
        train_ids = {r.doc_id for r in state.train_records}
        with state.lock:
            documents = list(state.documents.values())
            new_index = RetrievalIndex()
            embeddings = forward(trained, np.asarray([r.features for r in documents]))
            new_index.add(
                IndexedDocument(
                    r.doc_id,
                    e,
                    int(r.year),
                    SOURCE_ORIGINAL if r.doc_id in train_ids else SOURCE_USER_FEEDBACK,
                )
                for r, e in zip(documents, embeddings)
            )
            state.snapshot = Snapshot(trained, new_index, model_version(trained))
        job.report = {
            "iterations": len(report.losses),
            "losses": report.losses,
            "final_loss": report.losses[-1] if report.losses else None,
            "model_version": state.snapshot.version,
        }
        job.state = JOB_DONE
    except Exception as exc:  # noqa: BLE001 - job must record any failure
        job.reason = f"{type(exc).__name__}: {exc}"
        job.state = JOB_FAILED


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="chronorank", docs_url=None, redoc_url=None)
    app.state.service = state
    # single-user desk tool: let a separately served workbench call in
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def on_api_error(_request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_request: Request, exc: RequestValidationError):
        return ApiError(422, "validation_error", "invalid request body", exc.errors()).response()

    @app.exception_handler(ChronorankError)
    async def on_library_error(_request: Request, exc: ChronorankError):
        return ApiError(422, type(exc).__name__, str(exc)).response()

    @app.get("/health")
    def health():
        return {"status": "ok", "model_version": state.snapshot.version}

    @app.post("/query")
    def query(body: QueryRequest):
        snap = _require_snapshot(state)
        if (body.features is None) == (body.doc_id is None):
            raise ApiError(400, "bad_query", "provide exactly one of features or doc_id")
        top_k = body.top_k if body.top_k is not None else state.config["top_k"]
        k_estimate = body.k_estimate if body.k_estimate is not None else state.config["k_estimate"]
        if body.doc_id is not None:
            doc = snap.index.get(body.doc_id)
            if doc is None:
                raise ApiError(404, "unknown_doc", f"doc_id {body.doc_id!r} is not indexed")
            embedding = doc.embedding
        else:
            if len(body.features) != snap.model.feature_dim:
                raise ApiError(
                    422,
                    "bad_dimension",
                    f"expected {snap.model.feature_dim} features, got {len(body.features)}",
                )
            embedding = forward(snap.model, np.asarray(body.features))[0]
        hits = snap.index.query(embedding, top_k=max(1, top_k))
        estimate = snap.index.estimate_year(embedding, k=min(k_estimate, len(snap.index)))
        return {
            "hits": [hit._asdict() for hit in hits],
            "estimate": {
                "predicted_year": estimate.predicted_year,
                "neighbor_ids": list(estimate.neighbor_ids),
                "weights": list(estimate.weights),
            },
            "model_version": snap.version,
        }

    @app.post("/feedback/label")
    def feedback_label(body: FeedbackRequest):
        snap = _require_snapshot(state)
        try:
            record = DocumentRecord(body.doc_id, np.asarray(body.features), body.year, Split.TRAIN)
            if record.features.size != snap.model.feature_dim:
                raise InvalidInputError(
                    f"expected {snap.model.feature_dim} features, got {record.features.size}"
                )
        except InvalidInputError as exc:
            raise ApiError(422, "invalid_record", str(exc)) from exc
        with state.lock:
            if state.feedback_path:
                feedback_append(state.feedback_path, [record])
            embedding = forward(snap.model, record.features)[0]
            result = snap.index.add(
                [IndexedDocument(record.doc_id, embedding, body.year, SOURCE_USER_FEEDBACK)]
            )
            state.documents[record.doc_id] = record
        return {"index_size": result.count, "model_version": snap.version}

    @app.get("/relevance-matrix")
    def get_matrix(version: str | None = None):
        target = version or state.current_matrix_version
        if target is None or target not in state.matrices:
            raise ApiError(404, "unknown_matrix_version", f"no matrix version {target!r}")
        doc = matrix_to_json(state.matrices[target])
        doc["matrix_version"] = target
        return doc

    @app.get("/relevance-matrix/versions")
    def list_matrix_versions():
        return {"versions": state.matrix_order, "current": state.current_matrix_version}

    @app.put("/relevance-matrix")
    def put_matrix(body: dict):
        if not isinstance(body, dict):
            raise ApiError(422, "matrix_validation", "body must be a JSON object")
        with state.lock:
            current = state.matrices.get(state.current_matrix_version)
            try:
                if "op" in body:
                    if current is None:
                        raise ApiError(409, "no_matrix", "no matrix loaded to edit")
                    if body["op"] == "boost":
                        edited = boost_region(
                            current, int(body["lo"]), int(body["hi"]), float(body["factor"])
                        )
                    elif body["op"] == "set":
                        edited = set_cell(
                            current,
                            int(body["query_year"]),
                            int(body["item_year"]),
                            float(body["value"]),
                        )
                    else:
                        raise ApiError(
                            422, "matrix_validation", f"unknown op {body['op']!r}"
                        )
                else:
                    edited = matrix_from_json(body)
            except ApiError:
                raise
            except (ChronorankError, KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, "matrix_validation", str(exc)) from exc
            version = state.add_matrix(edited)
        response = {"matrix_version": version}
        if edited.warning:
            response["warning"] = edited.warning
        return response

    @app.post("/retrain")
    def retrain(body: RetrainRequest):
        snap = _require_snapshot(state)
        with state.lock:
            if any(job.state not in _TERMINAL for job in state.jobs.values()):
                raise ApiError(409, "job_already_running", "another retrain job is active")
            matrix_version = body.matrix_version or state.current_matrix_version
            if matrix_version not in state.matrices:
                raise ApiError(
                    404, "unknown_matrix_version", f"no matrix version {matrix_version!r}"
                )
            cfg = {
                "layer_dims": list(snap.model.layer_dims),
                "activation": snap.model.activation,
                "learning_rate": state.config["learning_rate"],
                "batch_size": state.config["batch_size"],
                "iterations": state.config["iterations"],
                "temperature": state.config["temperature"],
                "seed": state.config["seed"],
                "init_seed": state.config["init_seed"],
            }
            for field in ("learning_rate", "batch_size", "iterations", "temperature", "seed", "init_seed"):
                value = getattr(body, field)
                if value is not None:
                    cfg[field] = value
            job = RetrainJob(str(uuid.uuid4()), matrix_version, cfg)
            state.jobs[job.job_id] = job
        worker = threading.Thread(target=_run_retrain_job, args=(state, job), daemon=True)
        worker.start()
        return {"job_id": job.job_id}

    @app.get("/retrain/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "unknown_job", f"no job {job_id!r}")
        return job.to_json()

    @app.get("/projection")
    def projection():
        snap = _require_snapshot(state)
        return _projection_points(snap)

    @app.get("/metrics")
    def metrics(split: str = "test"):
        if split != "test":
            raise ApiError(422, "bad_split", "only split=test is supported")
        snap = _require_snapshot(state)
        if not state.test_records:
            raise ApiError(409, "no_test_split", "no held-out test split is loaded")
        result = evaluate(snap.model, snap.index, state.test_records, k=state.config["k_estimate"])
        doc = result.to_json()
        doc["model_version"] = snap.version
        return doc

    return app


def state_from_config(config: dict[str, Any]) -> ServiceState:
    """Assemble service state from the files named in the config."""
    from pathlib import Path

    from .model import load_model
    from .relevance import load_matrix

    model = None
    index = None
    if config["checkpoint"] and Path(config["checkpoint"]).exists():
        model = load_model(config["checkpoint"])
    if config["index"] and Path(config["index"]).exists():
        index = RetrievalIndex.load(config["index"])

    if config["matrix"] and Path(config["matrix"]).exists():
        matrix = load_matrix(config["matrix"])
    else:
        years = []
        if config["train_data"] and Path(config["train_data"]).exists():
            loaded = datastore.load_dataset(
                config["train_data"], _format_for(config["train_data"])
            )
            years = sorted({r.year for r in loaded.records if r.year is not None})
        if not years:
            raise InvalidInputError("no relevance matrix file and no training data to build one")
        from .ranking import RelevanceKind, RelevanceSpec

        matrix = build_matrix(years, RelevanceSpec(RelevanceKind.THRESHOLDED, 10))

    train_records: list[DocumentRecord] = []
    test_records: list[DocumentRecord] = []
    if config["train_data"] and Path(config["train_data"]).exists():
        train_records = datastore.load_dataset(
            config["train_data"], _format_for(config["train_data"])
        ).records
    if config["test_data"] and Path(config["test_data"]).exists():
        test_records = datastore.load_dataset(
            config["test_data"], _format_for(config["test_data"])
        ).records

    return state_from_objects(
        model,
        index,
        matrix,
        train_records,
        test_records,
        feedback_path=config["feedback"],
        config=config,
    )


def _format_for(path: str) -> datastore.DatasetFormat:
    return (
        datastore.DatasetFormat.JSON_LINES
        if str(path).endswith((".jsonl", ".ndjson"))
        else datastore.DatasetFormat.CSV_FEATURES
    )
