"""Query orchestration: retrieval, verdict, prompt, chat, YES/NO parse.

Four strategies share one entry point. The two vector strategies differ
only in corpus shape (per-drug lines vs per-association lines); the graph
strategy queries the property graph; the no-retrieval baseline sends the
bare question. In every case the chat backend sees a prompt whose final
sentence already states the retrieval outcome, so with the deterministic
backend the decision equals the verdict by construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .entities import ExtractedEntities, extract_entities
from .graph import PropertyGraph, build_cypher_for_pair, execute_cypher, parse_cypher
from .index import VectorIndex, search
from .kb import Chunk, KnowledgeBase, parse_format_a_line
from .prompts import (
    build_assertion,
    build_baseline_prompt,
    build_modified_prompt,
    parse_yes_no,
)

PIPELINES = ("rag_a", "rag_b", "graphrag", "baseline")
DEFAULT_K = 5


@dataclass(frozen=True)
class RetrievalVerdict:
    associated: bool
    pipeline: str
    evidence: tuple[str, ...]  # matched chunk_ids, or the matched triple
    raw_hits: tuple[tuple[str, float], ...] | None = None  # top-k audit trail


@dataclass(frozen=True)
class PromptContext:
    question: str
    assertion: str | None
    final_prompt: str
    pipeline: str


@dataclass(frozen=True)
class Answer:
    decision: str  # "YES" | "NO"
    explanation: str
    verdict: RetrievalVerdict
    prompt: PromptContext
    entities: ExtractedEntities | None
    evidence_texts: tuple[str, ...]
    backend_name: str
    generation_params: dict
    latency_ms: float


@dataclass
class PipelineResources:
    """Everything run_query may need, loaded once and shared read-only."""

    kb: KnowledgeBase
    provider: object | None = None
    index_a: VectorIndex | None = None
    index_b: VectorIndex | None = None
    graph: PropertyGraph | None = None
    k: int = DEFAULT_K
    _cypher_cache: dict = field(default_factory=dict, repr=False)


def filter_check_format_a(
    hits: list[tuple[Chunk, float]], entities: ExtractedEntities
) -> RetrievalVerdict:
    """Membership test over retrieved per-drug lines.

    The pair counts as found only when a hit belongs to the extracted
    drug and the extracted side effect equals one element of that line's
    comma-separated list. Substring overlap (a list holding "peptic
    ulcer" when the question asks about "ulcer") does not count.
    """
    se_name = entities.side_effect.name
    matched: list[str] = []
    for chunk, _score in hits:
        if chunk.drug_id != entities.drug.entity_id:
            continue
        _, listed = parse_format_a_line(chunk.text)
        if se_name in listed:
            matched.append(chunk.chunk_id)
    return RetrievalVerdict(
        associated=bool(matched),
        pipeline="rag_a",
        evidence=tuple(matched),
        raw_hits=tuple((c.chunk_id, s) for c, s in hits),
    )


def filter_check_format_b(
    hits: list[tuple[Chunk, float]], entities: ExtractedEntities
) -> RetrievalVerdict:
    """Membership test over retrieved per-association lines."""
    matched = [
        chunk.chunk_id
        for chunk, _score in hits
        if chunk.drug_id == entities.drug.entity_id
        and chunk.term_id == entities.side_effect.entity_id
    ]
    return RetrievalVerdict(
        associated=bool(matched),
        pipeline="rag_b",
        evidence=tuple(matched),
        raw_hits=tuple((c.chunk_id, s) for c, s in hits),
    )


def graph_check(
    resources: PipelineResources, entities: ExtractedEntities
) -> tuple[RetrievalVerdict, str]:
    """Run the pair query against the graph; returns (verdict, cypher text)."""
    drug_name = entities.drug.name
    se_name = entities.side_effect.name
    cypher = build_cypher_for_pair(drug_name, se_name)
    query = resources._cypher_cache.get(cypher)
    if query is None:
        query = parse_cypher(cypher)
        resources._cypher_cache[cypher] = query
    rows = execute_cypher(resources.graph, query)
    evidence = tuple(
        f"({row[query.source_var].name})-[{row[query.edge_var].label}]->"
        f"({row[query.target_var].name})"
        for row in rows
    )
    return (
        RetrievalVerdict(
            associated=bool(rows), pipeline="graphrag", evidence=evidence
        ),
        cypher,
    )


def run_query(
    question: str,
    pipeline: str,
    resources: PipelineResources,
    backend,
) -> Answer:
    """Answer one natural-language question through the chosen strategy."""
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}")
    started = time.perf_counter()

    if pipeline == "baseline":
        verdict = RetrievalVerdict(associated=False, pipeline="baseline", evidence=())
        prompt = PromptContext(
            question=question,
            assertion=None,
            final_prompt=build_baseline_prompt(question),
            pipeline=pipeline,
        )
        entities = None
        evidence_texts: tuple[str, ...] = ()
    else:
        entities = extract_entities(question, resources.kb)
        if pipeline == "graphrag":
            if resources.graph is None:
                raise ValueError("graphrag requires a loaded graph")
            verdict, _cypher = graph_check(resources, entities)
            evidence_texts = verdict.evidence
        else:
            index = resources.index_a if pipeline == "rag_a" else resources.index_b
            if index is None or resources.provider is None:
                raise ValueError(f"{pipeline} requires a loaded index and provider")
            hits = search(index, resources.provider, question, resources.k)
            check = filter_check_format_a if pipeline == "rag_a" else filter_check_format_b
            verdict = check(hits, entities)
            evidence_texts = tuple(c.text for c, _ in hits)
        assertion = build_assertion(
            verdict.associated,
            pipeline,
            entities.drug.name,
            entities.side_effect.name,
        )
        prompt = PromptContext(
            question=question,
            assertion=assertion,
            final_prompt=build_modified_prompt(question, assertion),
            pipeline=pipeline,
        )

    completion = backend.complete(prompt.final_prompt)
    parsed = parse_yes_no(completion)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return Answer(
        decision=parsed.decision,
        explanation=parsed.explanation,
        verdict=verdict,
        prompt=prompt,
        entities=entities,
        evidence_texts=evidence_texts,
        backend_name=getattr(backend, "name", "unknown"),
        generation_params=dict(getattr(backend, "generation_params", {})),
        latency_ms=elapsed_ms,
    )
