"""HTTP behaviour: status mapping, payload shapes, determinism, logging."""

import json
import logging
import pathlib

import pytest
from fastapi.testclient import TestClient

from pvrag.backends import DeterministicChatBackend, HashingEmbedder
from pvrag.config import ServiceConfig
from pvrag.errors import BackendUnavailable
from pvrag.graph import build_graph
from pvrag.index import build_index
from pvrag.kb import export_corpus, load_tsv
from pvrag.pipeline import PipelineResources
from pvrag.service import create_app

FIXTURE = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "mini_sider.tsv"


@pytest.fixture(scope="module")
def kb():
    return load_tsv(FIXTURE)


@pytest.fixture(scope="module")
def resources(kb):
    provider = HashingEmbedder()
    return PipelineResources(
        kb=kb,
        provider=provider,
        index_a=build_index(export_corpus(kb, "A"), provider),
        index_b=build_index(export_corpus(kb, "B"), provider),
        graph=build_graph(kb),
    )


@pytest.fixture(scope="module")
def client(resources):
    app = create_app(
        config=ServiceConfig(), resources=resources, backend=DeterministicChatBackend()
    )
    return TestClient(app)


QUESTION = "Is headache an adverse effect of metformin?"


def post_query(client, question, pipeline="graphrag", verbose=False, **kwargs):
    url = "/v1/query?verbose=1" if verbose else "/v1/query"
    return client.post(url, json={"question": question, "pipeline": pipeline}, **kwargs)


# --- query endpoint ----------------------------------------------------------


def test_query_graphrag_matches_oracle(client, kb, resources):
    response = post_query(client, QUESTION)
    assert response.status_code == 200
    body = response.json()
    assert body["decision"] == "YES"
    assert body["associated"] is True
    assert resources.graph.has_edge("metformin", "headache")
    assert body["entities"]["drug"]["name"] == "metformin"
    assert body["entities"]["side_effect"]["name"] == "headache"
    assert body["latency_ms"] >= 0.0
    # compact by default: no audit payload
    assert "prompt" not in body
    assert "evidence" not in body


def test_query_verbose_carries_audit_trail(client):
    body = post_query(client, QUESTION, verbose=True).json()
    assert body["prompt"].startswith("You are asked to answer")
    assert body["prompt"].endswith(
        "Metformin is known to be associated with headache as a side effect"
    )
    assert body["assertion"] in body["prompt"]
    assert body["evidence"]  # the matched edge
    assert body["backend"] == "deterministic"
    assert body["generation_params"] == {"temperature": 0.0}


def test_query_each_pipeline(client):
    for pipeline, expected in (
        ("rag_a", "YES"),
        ("rag_b", "YES"),
        ("graphrag", "YES"),
        ("baseline", "NO"),
    ):
        body = post_query(client, QUESTION, pipeline=pipeline).json()
        assert body["decision"] == expected, pipeline
        assert body["pipeline"] == pipeline


def test_query_negative_pair(client):
    body = post_query(client, "Is ulcer an adverse effect of aspirin?").json()
    assert body["decision"] == "NO"
    assert body["associated"] is False


def test_rag_verbose_shows_top_k_hits(client, resources):
    body = post_query(client, QUESTION, pipeline="rag_b", verbose=True).json()
    assert len(body["evidence"]) == resources.k
    assert len(body["raw_hits"]) == resources.k
    assert all(isinstance(s, float) for _, s in body["raw_hits"])


def test_missing_question_is_400(client):
    response = client.post("/v1/query", json={"pipeline": "graphrag"})
    assert response.status_code == 400
    assert response.json()["error"]["code"] == "malformed_body"


def test_non_json_body_is_400(client):
    response = client.post(
        "/v1/query", content=b"not json", headers={"content-type": "application/json"}
    )
    assert response.status_code == 400


def test_unknown_pipeline_is_400(client):
    response = client.post(
        "/v1/query", json={"question": QUESTION, "pipeline": "rag_c"}
    )
    assert response.status_code == 400


def test_pipeline_defaults_to_config(client):
    response = client.post("/v1/query", json={"question": QUESTION})
    assert response.status_code == 200
    assert response.json()["pipeline"] == "graphrag"


def test_unknown_drug_is_422_with_code(client):
    response = post_query(client, "Is headache an adverse effect of vorplastin?")
    assert response.status_code == 422
    error = response.json()["error"]
    assert error["code"] == "drug_not_found"
    assert "vorplastin" in error["message"]


def test_near_miss_candidates_in_422(client):
    response = post_query(client, "Is headache an adverse effect of asprin?")
    assert response.status_code == 422
    assert "aspirin" in response.json()["error"].get("candidates", [])


def test_ambiguous_drug_is_422(client):
    response = post_query(
        client, "Is headache an adverse effect of aspirin or ibuprofen?"
    )
    assert response.status_code == 422
    error = response.json()["error"]
    assert error["code"] == "ambiguous_drug"
    assert set(error["candidates"]) == {"aspirin", "ibuprofen"}


def test_backend_outage_is_502(resources):
    class Downed(DeterministicChatBackend):
        def complete(self, prompt):
            raise BackendUnavailable("connection refused")

    app = create_app(config=ServiceConfig(), resources=resources, backend=Downed())
    response = post_query(TestClient(app), QUESTION)
    assert response.status_code == 502
    assert response.json()["error"]["code"] == "backend_unavailable"


def test_identical_requests_identical_bodies(client):
    def body_without_latency(r):
        data = r.json()
        data.pop("latency_ms")
        return data

    first = post_query(client, QUESTION, verbose=True)
    second = post_query(client, QUESTION, verbose=True)
    assert body_without_latency(first) == body_without_latency(second)


# --- drug lookup -------------------------------------------------------------


def test_drug_lookup_matches_kb(client, kb):
    response = client.get("/v1/drugs/aspirin/side-effects")
    assert response.status_code == 200
    body = response.json()
    drug = kb.drug_by_name("aspirin")
    expected = sorted(kb.terms[t].name for t in kb.adjacency[drug.drug_id])
    assert [e["name"] for e in body["side_effects"]] == expected
    assert body["count"] == len(expected)
    assert body["drug"]["atc_codes"] == ["B01AC06", "N02BA01"]
    socs = {e["soc_class"] for e in body["side_effects"]}
    assert len(socs) > 1  # both named classes and null entries appear


def test_drug_lookup_canonicalizes_name(client):
    response = client.get("/v1/drugs/Insulin%20Glargine/side-effects")
    assert response.status_code == 200
    assert response.json()["drug"]["name"] == "insulin glargine"


def test_drug_lookup_unknown_is_404(client):
    response = client.get("/v1/drugs/vorplastin/side-effects")
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "drug_not_found"


# --- health and logging ------------------------------------------------------


def test_healthz_reports_fingerprints(client, kb, resources):
    body = client.get("/healthz").json()
    assert body["status"] == "ok"
    assert body["kb_fingerprint"] == kb.fingerprint
    assert body["counts"] == {"drugs": 70, "terms": 69, "associations": 1381}
    assert body["index_a"]["provider_fingerprint"] == resources.provider.fingerprint
    assert body["index_b"]["chunks"] == 1381
    assert body["graph"]["edges"] == 1381
    assert body["backend"] == "deterministic"


def test_one_json_log_line_per_request(client, caplog):
    with caplog.at_level(logging.INFO, logger="pvrag.service"):
        post_query(client, QUESTION)
    lines = [r.message for r in caplog.records if r.name == "pvrag.service"]
    assert len(lines) == 1
    entry = json.loads(lines[0])
    assert entry["method"] == "POST"
    assert entry["path"] == "/v1/query"
    assert entry["status"] == 200
    assert entry["pipeline"] == "graphrag"
    assert entry["decision"] == "YES"
    assert entry["latency_ms"] >= 0.0


def test_error_requests_logged_with_code(client, caplog):
    with caplog.at_level(logging.INFO, logger="pvrag.service"):
        post_query(client, "Is headache an adverse effect of vorplastin?")
    entry = json.loads(caplog.records[-1].message)
    assert entry["status"] == 422
    assert entry["error"] == "drug_not_found"
