import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from chronorank.datastore import SyntheticSpec, generate_synthetic, split_dataset
from chronorank.evaluation import build_index, evaluate
from chronorank.index import projection_points
from chronorank.model import TrainingConfig, forward, init_model, train
from chronorank.ranking import LossConfig, RelevanceKind, RelevanceSpec
from chronorank.relevance import boost_region, build_matrix, matrix_to_json
from chronorank.service import create_app, state_from_objects


YEARS = (1900, 1919)


def small_world(tmp_path, iterations=60):
    """Train a small model and return (state, client, split, matrix)."""
    records = generate_synthetic(SyntheticSpec(*YEARS, 4, 8, 0.05, 3))
    split = split_dataset(records, 0.25, seed=1)
    matrix = build_matrix(range(YEARS[0], YEARS[1] + 1), RelevanceSpec(RelevanceKind.THRESHOLDED, 5))
    model = init_model([8, 16, 4], "relu", seed=2)
    trained, _ = train(
        model, split.train, matrix,
        TrainingConfig(0.5, batch_size=16, max_iterations=iterations, seed=0),
        LossConfig(temperature=0.05),
    )
    index = build_index(trained, split.train)
    state = state_from_objects(
        trained, index, matrix, split.train, split.test,
        feedback_path=tmp_path / "feedback.jsonl",
        config={"iterations": 30, "batch_size": 16, "learning_rate": 0.5,
                "temperature": 0.05, "seed": 0, "init_seed": 2},
    )
    return state, TestClient(create_app(state)), split, matrix


@pytest.fixture
def world(tmp_path):
    return small_world(tmp_path)


class TestQueryEndpoint:
    def test_query_by_doc_id_is_self_retrieval(self, world):
        state, client, split, _ = world
        target = split.train[0].doc_id
        response = client.post("/query", json={"doc_id": target, "top_k": 5})
        assert response.status_code == 200
        body = response.json()
        assert body["hits"][0]["doc_id"] == target
        assert body["hits"][0]["similarity"] == pytest.approx(1.0, abs=1e-6)
        assert body["model_version"] == state.snapshot.version

    def test_top_k_clamps_to_index_size(self, world):
        _, client, split, _ = world
        response = client.post(
            "/query", json={"doc_id": split.train[0].doc_id, "top_k": 10_000}
        )
        assert len(response.json()["hits"]) == sum(1 for _ in split.train)

    def test_estimate_matches_library_call(self, world):
        state, client, split, _ = world
        record = split.test[0]
        response = client.post(
            "/query", json={"features": list(record.features), "k_estimate": 7}
        )
        embedding = forward(state.snapshot.model, record.features)[0]
        expected = state.snapshot.index.estimate_year(embedding, k=7)
        body = response.json()["estimate"]
        assert body["predicted_year"] == pytest.approx(expected.predicted_year, abs=1e-12)
        assert tuple(body["neighbor_ids"]) == expected.neighbor_ids

    def test_both_or_neither_is_400(self, world):
        _, client, split, _ = world
        record = split.train[0]
        both = client.post(
            "/query", json={"features": list(record.features), "doc_id": record.doc_id}
        )
        neither = client.post("/query", json={})
        assert both.status_code == 400 and neither.status_code == 400
        assert set(both.json()["error"]) >= {"code", "message"}

    def test_wrong_dimension_is_422(self, world):
        _, client, _, _ = world
        response = client.post("/query", json={"features": [1.0, 2.0]})
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "bad_dimension"

    def test_no_model_is_409(self, tmp_path):
        matrix = build_matrix([1900, 1901], RelevanceSpec(RelevanceKind.THRESHOLDED, 5))
        state = state_from_objects(None, None, matrix, [])
        client = TestClient(create_app(state))
        response = client.post("/query", json={"features": [1.0]})
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "no_model"


class TestFeedbackEndpoint:
    def test_label_then_query_sees_it(self, world):
        state, client, split, _ = world
        vector = list(np.asarray(split.test[0].features) * 1.0)
        before = len(state.snapshot.index)
        response = client.post(
            "/feedback/label", json={"doc_id": "fresh-doc", "features": vector, "year": 1905}
        )
        assert response.status_code == 200
        assert response.json()["index_size"] == before + 1
        hits = client.post("/query", json={"features": vector, "top_k": 1}).json()["hits"]
        assert hits[0]["doc_id"] == "fresh-doc"

    def test_duplicate_id_replaces(self, world):
        _, client, split, _ = world
        vector = list(split.test[0].features)
        first = client.post(
            "/feedback/label", json={"doc_id": "dup", "features": vector, "year": 1901}
        ).json()["index_size"]
        second = client.post(
            "/feedback/label", json={"doc_id": "dup", "features": vector, "year": 1902}
        ).json()["index_size"]
        assert first == second

    def test_feedback_lands_in_journal(self, world):
        state, client, split, _ = world
        vector = list(split.test[1].features)
        client.post("/feedback/label", json={"doc_id": "j1", "features": vector, "year": 1910})
        journal = [json.loads(line) for line in open(state.feedback_path)]
        assert journal[-1]["doc_id"] == "j1"

    def test_invalid_record_is_422(self, world):
        _, client, _, _ = world
        response = client.post(
            "/feedback/label", json={"doc_id": "bad", "features": [1.0], "year": 1900}
        )
        assert response.status_code == 422


class TestMatrixEndpoints:
    def test_get_reflects_put(self, world):
        _, client, _, _ = world
        base = client.get("/relevance-matrix").json()
        put = client.put(
            "/relevance-matrix", json={"op": "set", "query_year": 1905, "item_year": 1906, "value": 9.5}
        )
        assert put.status_code == 200
        after = client.get("/relevance-matrix").json()
        row = after["years"].index(1905)
        col = after["years"].index(1906)
        assert after["values"][row][col] == 9.5
        assert after["matrix_version"] != base["matrix_version"]
        assert after["provenance"] == "edited"

    def test_boost_op_equals_library_boost(self, world, tmp_path):
        _, client, _, matrix = world
        client.put("/relevance-matrix", json={"op": "boost", "lo": 1900, "hi": 1904, "factor": 2.0})
        served = client.get("/relevance-matrix").json()
        expected = matrix_to_json(boost_region(matrix, 1900, 1904, 2.0))
        assert served["values"] == expected["values"]

    def test_negative_cell_full_replacement_is_422(self, world):
        _, client, _, matrix = world
        doc = matrix_to_json(matrix)
        doc["values"][0][0] = -3.0
        response = client.put("/relevance-matrix", json=doc)
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "matrix_validation"

    def test_versions_are_listable_and_retained(self, world):
        _, client, _, _ = world
        v0 = client.get("/relevance-matrix").json()["matrix_version"]
        client.put("/relevance-matrix", json={"op": "boost", "lo": 1900, "hi": 1901, "factor": 3.0})
        listing = client.get("/relevance-matrix/versions").json()
        assert v0 in listing["versions"]
        assert listing["current"] != v0
        old = client.get("/relevance-matrix", params={"version": v0})
        assert old.status_code == 200
        assert old.json()["provenance"] == "generated"


def wait_for_done(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    states = []
    while time.time() < deadline:
        body = client.get(f"/retrain/{job_id}").json()
        if not states or states[-1] != body["state"]:
            states.append(body["state"])
        if body["state"] in ("done", "failed"):
            return body, states
        time.sleep(0.02)
    raise TimeoutError(f"job {job_id} did not finish; states seen: {states}")


class TestRetrainLifecycle:
    def test_submit_poll_done_swaps_model(self, world):
        state, client, _, _ = world
        old_version = state.snapshot.version
        response = client.post("/retrain", json={})
        assert response.status_code == 200
        job_id = response.json()["job_id"]
        body, states = wait_for_done(client, job_id)
        assert body["state"] == "done"
        assert states == sorted(set(states), key=states.index)  # no state regressions
        assert body["report"]["iterations"] == state.config["iterations"]
        new_version = client.get("/health").json()["model_version"]
        assert new_version == body["report"]["model_version"]
        assert new_version != old_version
        # queries are stamped with the new model version
        hit = client.post("/query", json={"doc_id": state.train_records[0].doc_id})
        assert hit.json()["model_version"] == new_version

    def test_second_submit_while_running_is_409(self, world):
        _, client, _, _ = world
        first = client.post("/retrain", json={"iterations": 50})
        assert first.status_code == 200
        second = client.post("/retrain", json={})
        assert second.status_code == 409
        assert second.json()["error"]["code"] == "job_already_running"
        wait_for_done(client, first.json()["job_id"])

    def test_unknown_matrix_version_is_404(self, world):
        _, client, _, _ = world
        response = client.post("/retrain", json={"matrix_version": "rm-9999"})
        assert response.status_code == 404

    def test_unknown_job_is_404(self, world):
        _, client, _, _ = world
        assert client.get("/retrain/nope").status_code == 404

    def test_concurrent_submissions_admit_exactly_one(self, world):
        state, client, _, _ = world
        codes = []
        barrier = threading.Barrier(6)

        def submit():
            barrier.wait()
            codes.append(client.post("/retrain", json={"iterations": 40}).status_code)

        threads = [threading.Thread(target=submit) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(codes) == [200, 409, 409, 409, 409, 409]
        admitted = next(iter(state.jobs))
        wait_for_done(client, admitted)

    def test_swap_is_atomic_under_continuous_queries(self, world):
        state, client, split, _ = world
        probe_record = split.train[0]
        vector = list(probe_record.features)
        versions_seen = []
        stop = threading.Event()
        failures = []

        def probe():
            while not stop.is_set():
                body = client.post("/query", json={"features": vector, "top_k": 1}).json()
                versions_seen.append(body["model_version"])
                if body["hits"][0]["doc_id"] != probe_record.doc_id or (
                    body["hits"][0]["similarity"] < 1.0 - 1e-6
                ):
                    failures.append(body)

        thread = threading.Thread(target=probe)
        thread.start()
        job_id = client.post("/retrain", json={"iterations": 60}).json()["job_id"]
        wait_for_done(client, job_id)
        time.sleep(0.05)
        stop.set()
        thread.join()
        assert not failures, failures[:2]
        distinct = sorted(set(versions_seen), key=versions_seen.index)
        assert 1 <= len(distinct) <= 2
        # once the new version appears the old one never comes back
        if len(distinct) == 2:
            flip = versions_seen.index(distinct[1])
            assert all(v == distinct[1] for v in versions_seen[flip:])


class TestProjectionEndpoint:
    def test_equals_library_composition(self, world):
        state, client, _, _ = world
        body = client.get("/projection").json()
        points, excluded = projection_points(state.snapshot.index)
        assert body["excluded_years"] == excluded
        assert [(p["year"], p["x"], p["y"]) for p in body["points"]] == [
            (year, x, y) for year, x, y in points
        ]

    def test_repeated_calls_are_byte_identical(self, world):
        _, client, _, _ = world
        first = client.get("/projection")
        second = client.get("/projection")
        assert first.content == second.content

    def test_single_year_index_puts_point_at_origin(self, tmp_path):
        records = generate_synthetic(SyntheticSpec(1900, 1901, 4, 8, 0.0, 1))
        only_1900 = [r for r in records if r.year == 1900]
        matrix = build_matrix([1900], RelevanceSpec(RelevanceKind.THRESHOLDED, 5))
        model = init_model([8, 4], "relu", seed=0)
        index = build_index(model, only_1900)
        state = state_from_objects(model, index, matrix, only_1900)
        client = TestClient(create_app(state))
        body = client.get("/projection").json()
        assert body["points"] == [{"year": 1900, "x": 0.0, "y": 0.0}]


class TestMetricsEndpoint:
    def test_matches_library_evaluation(self, world):
        state, client, split, _ = world
        body = client.get("/metrics", params={"split": "test"}).json()
        expected = evaluate(
            state.snapshot.model, state.snapshot.index, split.test,
            k=state.config["k_estimate"],
        )
        assert body["mae"] == pytest.approx(expected.mae, abs=1e-12)
        assert body["map"] == pytest.approx(expected.map, abs=1e-12)
        assert body["n_queries"] == expected.n_queries

    def test_no_test_split_is_409(self, world, tmp_path):
        state, _, split, matrix = world
        bare = state_from_objects(
            state.snapshot.model, state.snapshot.index, matrix, split.train, []
        )
        client = TestClient(create_app(bare))
        response = client.get("/metrics")
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "no_test_split"


class TestHealth:
    def test_health_reports_version(self, world):
        state, client, _, _ = world
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["model_version"] == state.snapshot.version
