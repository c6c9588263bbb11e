"""Record real service responses as JSON fixtures for the UI contract tests.

Run from the repository root after installing the Python package:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import time
from pathlib import Path

from fastapi.testclient import TestClient

from chronorank.datastore import SyntheticSpec, generate_synthetic, split_dataset
from chronorank.evaluation import build_index
from chronorank.model import TrainingConfig, init_model, train
from chronorank.ranking import LossConfig, RelevanceKind, RelevanceSpec
from chronorank.relevance import build_matrix
from chronorank.service import RetrainJob, create_app, state_from_objects

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def record(name: str, payload) -> None:
    path = FIXTURES / f"{name}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


def main() -> None:
    records = generate_synthetic(SyntheticSpec(1900, 1919, 4, 8, 0.05, mixing_seed=3))
    split = split_dataset(records, 0.25, seed=1)
    matrix = build_matrix(range(1900, 1920), RelevanceSpec(RelevanceKind.THRESHOLDED, 5))
    model = init_model([8, 3, 4], "tanh", seed=2)
    trained, _ = train(
        model, split.train, matrix,
        TrainingConfig(0.5, batch_size=16, max_iterations=80, seed=0),
        LossConfig(temperature=0.05),
    )
    index = build_index(trained, split.train)
    state = state_from_objects(
        trained, index, matrix, split.train, split.test,
        config={"iterations": 40, "batch_size": 16, "learning_rate": 0.5,
                "temperature": 0.05, "seed": 0, "init_seed": 2},
    )
    client = TestClient(create_app(state))

    record("health", client.get("/health").json())
    record("matrix", client.get("/relevance-matrix").json())
    record("matrix_versions", client.get("/relevance-matrix/versions").json())

    query_record = split.test[0]
    record("query", client.post(
        "/query", json={"features": list(query_record.features), "top_k": 8, "k_estimate": 5}
    ).json())
    record("query_error_no_input", client.post("/query", json={}).json())

    record("feedback", client.post(
        "/feedback/label",
        json={"doc_id": "ui-confirmed-1", "features": list(query_record.features), "year": 1912},
    ).json())

    record("matrix_put_boost", client.put(
        "/relevance-matrix", json={"op": "boost", "lo": 1905, "hi": 1909, "factor": 2.0}
    ).json())
    bad = dict(client.get("/relevance-matrix").json())
    bad.pop("matrix_version", None)
    bad["values"] = [list(row) for row in bad["values"]]
    bad["values"][0][0] = -1.0
    response = client.put("/relevance-matrix", json=bad)
    record("matrix_put_422", response.json())

    submit = client.post("/retrain", json={"iterations": 40}).json()
    record("retrain_submit", submit)
    while True:
        job = client.get(f"/retrain/{submit['job_id']}").json()
        if job["state"] in ("done", "failed"):
            break
        time.sleep(0.05)
    record("job_done", job)

    # intermediate job states, serialized by the service's own encoder
    queued = RetrainJob("fixture-job", "rm-0001", job["config"])
    record("job_queued", queued.to_json())
    queued.state = "running"
    queued.iteration = 17
    queued.loss = 0.8312
    record("job_running", queued.to_json())
    queued.state = "failed"
    queued.reason = "InvalidInputError: dataset has 1 labeled records, need >= batch_size 16"
    record("job_failed", queued.to_json())

    record("projection", client.get("/projection").json())
    record("metrics", client.get("/metrics", params={"split": "test"}).json())


if __name__ == "__main__":
    main()
