"""End-to-end behaviour of the four query strategies on the fixture KB."""

import pathlib

import pytest

from pvrag.backends import DeterministicChatBackend, HashingEmbedder
from pvrag.entities import extract_entities
from pvrag.errors import DrugNotFound
from pvrag.graph import build_graph
from pvrag.index import build_index
from pvrag.kb import export_corpus, load_tsv
from pvrag.pipeline import (
    PipelineResources,
    RetrievalVerdict,
    filter_check_format_a,
    filter_check_format_b,
    run_query,
)
from pvrag.prompts import INSTRUCTION, build_question
from pvrag.rng import SplitMix64

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
def backend():
    return DeterministicChatBackend()


def ask(kb, drug_id, term_id):
    return build_question(kb.terms[term_id].name, kb.drugs[drug_id].name)


def all_pairs(kb):
    for drug_id, term_ids in sorted(kb.adjacency.items()):
        for term_id in term_ids:
            yield drug_id, term_id


def sample_negative_pairs(kb, n, seed=4242):
    rng = SplitMix64(seed)
    drug_ids = sorted(kb.adjacency)
    term_ids = sorted(kb.terms)
    out = []
    while len(out) < n:
        drug_id = drug_ids[rng.below(len(drug_ids))]
        term_id = term_ids[rng.below(len(term_ids))]
        if term_id not in kb.adjacency[drug_id]:
            out.append((drug_id, term_id))
    return out


# --- worked examples -------------------------------------------------------


def test_graphrag_known_pair_answers_yes(kb, resources, backend):
    answer = run_query(
        "Is headache an adverse effect of metformin?", "graphrag", resources, backend
    )
    assert answer.decision == "YES"
    assert answer.verdict.associated is True
    assert answer.prompt.assertion == (
        "Metformin is known to be associated with headache as a side effect"
    )
    assert answer.prompt.final_prompt == (
        INSTRUCTION
        + "Is headache an adverse effect of metformin?"
        + answer.prompt.assertion
    )
    assert answer.verdict.evidence  # the matched edge is the evidence
    assert answer.entities.drug.name == "metformin"


def test_graphrag_absent_pair_answers_no(kb, resources, backend):
    # aspirin lists "peptic ulcer" but not the bare term "ulcer"
    answer = run_query(
        "Is ulcer an adverse effect of aspirin?", "graphrag", resources, backend
    )
    assert answer.decision == "NO"
    assert answer.verdict.associated is False
    assert answer.verdict.evidence == ()
    assert "is not known to be associated with" in answer.prompt.assertion


def test_rag_b_round_trip_both_polarities(kb, resources, backend):
    yes = run_query(
        "Is headache an adverse effect of metformin?", "rag_b", resources, backend
    )
    assert yes.decision == "YES"
    assert yes.verdict.evidence  # chunk ids of the matching lines
    no = run_query(
        "Is ulcer an adverse effect of aspirin?", "rag_b", resources, backend
    )
    assert no.decision == "NO"
    assert no.verdict.evidence == ()
    assert len(no.evidence_texts) == resources.k  # top-k still reported


def test_baseline_answers_without_retrieval(resources, backend):
    answer = run_query(
        "Is headache an adverse effect of metformin?", "baseline", resources, backend
    )
    assert answer.decision == "NO"
    assert answer.verdict == RetrievalVerdict(
        associated=False, pipeline="baseline", evidence=()
    )
    assert answer.entities is None
    assert answer.prompt.assertion is None
    assert "RAG Results" not in answer.prompt.final_prompt


# --- filter checks as pure functions ---------------------------------------


def chunk_by_id(index, chunk_id):
    for chunk in index.chunks:
        if chunk.chunk_id == chunk_id:
            return chunk
    raise KeyError(chunk_id)


def a_chunk_for(resources, drug_id):
    for chunk in resources.index_a.chunks:
        if chunk.drug_id == drug_id:
            return chunk
    raise KeyError(drug_id)


def test_filter_a_requires_exact_list_element(kb, resources):
    ents = extract_entities("Is ulcer an adverse effect of aspirin?", kb)
    aspirin = kb.drug_by_name("aspirin")
    hit = [(a_chunk_for(resources, aspirin.drug_id), 0.9)]
    assert "peptic ulcer" in hit[0][0].text
    verdict = filter_check_format_a(hit, ents)
    assert verdict.associated is False

    ents2 = extract_entities("Is peptic ulcer an adverse effect of aspirin?", kb)
    assert filter_check_format_a(hit, ents2).associated is True


def test_filter_a_ignores_other_drugs_lines(kb, resources):
    ents = extract_entities("Is headache an adverse effect of metformin?", kb)
    other = kb.drug_by_name("aspirin")
    hit = [(a_chunk_for(resources, other.drug_id), 0.99)]
    assert "headache" in hit[0][0].text
    assert filter_check_format_a(hit, ents).associated is False


def test_filter_b_requires_pair_identity(kb, resources):
    ents = extract_entities("Is headache an adverse effect of metformin?", kb)
    metformin = kb.drug_by_name("metformin")
    headache = kb.term_by_name("headache")
    nausea = kb.term_by_name("nausea")
    gold = next(
        c
        for c in resources.index_b.chunks
        if c.drug_id == metformin.drug_id and c.term_id == headache.term_id
    )
    near = next(
        c
        for c in resources.index_b.chunks
        if c.drug_id == metformin.drug_id and c.term_id == nausea.term_id
    )
    assert filter_check_format_b([(near, 0.9)], ents).associated is False
    assert filter_check_format_b([(near, 0.9), (gold, 0.8)], ents).associated is True


def test_gold_injection_matches_graph_oracle(kb, resources):
    """With the right chunk guaranteed in the hit list, both filters agree
    with edge membership for every positive pair and a negative sample."""
    graph = resources.graph
    b_by_pair = {
        (c.drug_id, c.term_id): c for c in resources.index_b.chunks
    }
    for drug_id, term_id in all_pairs(kb):
        q = ask(kb, drug_id, term_id)
        ents = extract_entities(q, kb)
        hits_a = [(a_chunk_for(resources, drug_id), 1.0)]
        hits_b = [(b_by_pair[(drug_id, term_id)], 1.0)]
        edge = graph.has_edge(kb.drugs[drug_id].name, kb.terms[term_id].name)
        assert edge is True
        assert filter_check_format_a(hits_a, ents).associated is True
        assert filter_check_format_b(hits_b, ents).associated is True
    for drug_id, term_id in sample_negative_pairs(kb, 300):
        q = ask(kb, drug_id, term_id)
        ents = extract_entities(q, kb)
        hits_a = [(a_chunk_for(resources, drug_id), 1.0)]
        drug_b_chunks = [
            (c, 0.5) for c in resources.index_b.chunks if c.drug_id == drug_id
        ][:5]
        assert graph.has_edge(kb.drugs[drug_id].name, kb.terms[term_id].name) is False
        assert filter_check_format_a(hits_a, ents).associated is False
        assert filter_check_format_b(drug_b_chunks, ents).associated is False


# --- decision always mirrors the verdict under the deterministic backend ---


def test_decision_equals_verdict_everywhere(kb, resources, backend):
    rng = SplitMix64(99)
    pairs = list(all_pairs(kb))
    chosen = rng.sample(pairs, 40) + sample_negative_pairs(kb, 40, seed=100)
    for drug_id, term_id in chosen:
        q = ask(kb, drug_id, term_id)
        for pipeline in ("rag_a", "rag_b", "graphrag", "baseline"):
            answer = run_query(q, pipeline, resources, backend)
            assert (answer.decision == "YES") == answer.verdict.associated, (
                pipeline,
                q,
            )
            if pipeline == "graphrag":
                assert bool(answer.verdict.evidence) == answer.verdict.associated


# --- retrieval quality on the fixture ---------------------------------------


def run_positive_recall(kb, resources, backend, pipeline):
    hits = 0
    total = 0
    for drug_id, term_id in all_pairs(kb):
        total += 1
        answer = run_query(ask(kb, drug_id, term_id), pipeline, resources, backend)
        hits += answer.decision == "YES"
    return hits / total


def test_format_b_recall_near_perfect(kb, resources, backend):
    assert run_positive_recall(kb, resources, backend, "rag_b") >= 0.99


def test_format_a_recall_strictly_lower(kb, resources, backend):
    recall_a = run_positive_recall(kb, resources, backend, "rag_a")
    recall_b = run_positive_recall(kb, resources, backend, "rag_b")
    assert recall_a < recall_b
    assert recall_a >= 0.80  # still a working retriever, just a weaker format


def test_negatives_never_yes_for_retrieval_pipelines(kb, resources, backend):
    for drug_id, term_id in sample_negative_pairs(kb, 120, seed=321):
        q = ask(kb, drug_id, term_id)
        for pipeline in ("rag_a", "rag_b", "graphrag"):
            answer = run_query(q, pipeline, resources, backend)
            assert answer.decision == "NO", (pipeline, q)


# --- error handling ---------------------------------------------------------


def test_entity_error_propagates(resources, backend):
    for pipeline in ("rag_a", "rag_b", "graphrag"):
        with pytest.raises(DrugNotFound):
            run_query(
                "Is headache an adverse effect of vorplastin?",
                pipeline,
                resources,
                backend,
            )


def test_unknown_pipeline_rejected(resources, backend):
    with pytest.raises(ValueError):
        run_query("Is x an adverse effect of y?", "rag_c", resources, backend)


def test_missing_resources_rejected(kb, backend):
    bare = PipelineResources(kb=kb)
    with pytest.raises(ValueError):
        run_query("Is headache an adverse effect of aspirin?", "graphrag", bare, backend)
    with pytest.raises(ValueError):
        run_query("Is headache an adverse effect of aspirin?", "rag_a", bare, backend)


def test_answer_carries_audit_fields(resources, backend):
    answer = run_query(
        "Is headache an adverse effect of metformin?", "rag_a", resources, backend
    )
    assert answer.backend_name == backend.name
    assert answer.generation_params == backend.generation_params
    assert answer.latency_ms >= 0.0
    assert answer.verdict.raw_hits is not None
    assert len(answer.verdict.raw_hits) == resources.k
