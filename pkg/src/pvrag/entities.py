"""Dictionary-based extraction of one drug and one side effect per question.

The knowledge base is a closed vocabulary, so extraction is gazetteer
matching: every contiguous word-token run of the question is compared
against the canonical names, case-insensitively and ignoring punctuation
between words. A match strictly contained in a longer match (of either
kind) is discarded, which is what resolves "peptic ulcer" over "ulcer".
Whatever survives must name exactly one drug and one side effect;
anything else is reported as a typed error instead of a guess.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass

from .errors import (
    AmbiguousDrug,
    AmbiguousSideEffect,
    DrugNotFound,
    SideEffectNotFound,
)
from .kb import KnowledgeBase

_WORD_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class EntityMatch:
    surface: str  # span text exactly as written in the question
    start: int  # character offsets into the question
    end: int
    entity_id: str
    name: str  # canonical dictionary name


@dataclass(frozen=True)
class ExtractedEntities:
    question: str
    drug: EntityMatch
    side_effect: EntityMatch


@dataclass(frozen=True)
class _Candidate:
    kind: str  # "drug" | "side_effect"
    entity_id: str
    name: str
    tok_start: int
    tok_end: int  # exclusive
    char_start: int
    char_end: int


def extract_entities(question: str, kb: KnowledgeBase) -> ExtractedEntities:
    """Find the unique (drug, side effect) pair a question mentions.

    Raises DrugNotFound / SideEffectNotFound when a kind has no match
    (carrying near-miss suggestions), AmbiguousDrug / AmbiguousSideEffect
    when several distinct entities of one kind survive longest-match
    filtering.
    """
    if not question or not question.strip():
        raise DrugNotFound("question is empty", [])

    tokens = [(m.group().lower(), m.start(), m.end()) for m in _WORD_RE.finditer(question)]
    words = [t[0] for t in tokens]

    lexicon: dict[tuple[str, ...], list[tuple[str, str, str]]] = {}
    max_len = 1
    for drug in kb.drugs.values():
        key = tuple(drug.name.split())
        lexicon.setdefault(key, []).append(("drug", drug.drug_id, drug.name))
        max_len = max(max_len, len(key))
    for term in kb.terms.values():
        key = tuple(term.name.split())
        lexicon.setdefault(key, []).append(("side_effect", term.term_id, term.name))
        max_len = max(max_len, len(key))

    candidates: list[_Candidate] = []
    for start in range(len(words)):
        for length in range(1, min(max_len, len(words) - start) + 1):
            key = tuple(words[start : start + length])
            for kind, entity_id, name in lexicon.get(key, ()):
                candidates.append(
                    _Candidate(
                        kind=kind,
                        entity_id=entity_id,
                        name=name,
                        tok_start=start,
                        tok_end=start + length,
                        char_start=tokens[start][1],
                        char_end=tokens[start + length - 1][2],
                    )
                )

    surviving = [c for c in candidates if not _strictly_contained(c, candidates)]

    drugs = [c for c in surviving if c.kind == "drug"]
    ses = [c for c in surviving if c.kind == "side_effect"]

    drug_ids = sorted({c.entity_id for c in drugs})
    se_ids = sorted({c.entity_id for c in ses})

    if not drug_ids:
        raise DrugNotFound(
            f"no known drug mentioned in {question!r}",
            _near_misses(words, [d.name for d in kb.drugs.values()]),
        )
    if len(drug_ids) > 1:
        raise AmbiguousDrug(
            f"question names {len(drug_ids)} drugs",
            sorted({c.name for c in drugs}),
        )
    if not se_ids:
        raise SideEffectNotFound(
            f"no known side effect mentioned in {question!r}",
            _near_misses(words, [t.name for t in kb.terms.values()]),
        )
    if len(se_ids) > 1:
        raise AmbiguousSideEffect(
            f"question names {len(se_ids)} side effects",
            sorted({c.name for c in ses}),
        )

    drug_spans = sorted(
        (c for c in drugs if c.entity_id == drug_ids[0]),
        key=lambda c: c.tok_start,
    )
    se_spans = sorted(
        (c for c in ses if c.entity_id == se_ids[0]), key=lambda c: c.tok_start
    )
    for d in drug_spans:
        for s in se_spans:
            if d.tok_end <= s.tok_start or s.tok_end <= d.tok_start:
                return ExtractedEntities(
                    question=question,
                    drug=_to_match(question, d),
                    side_effect=_to_match(question, s),
                )
    # Every mention of the drug coincides with every mention of the side
    # effect; the question cannot be naming both.
    raise AmbiguousSideEffect(
        "drug and side-effect mentions overlap",
        sorted({c.name for c in drugs} | {c.name for c in ses}),
    )


def _strictly_contained(c: _Candidate, candidates: list[_Candidate]) -> bool:
    return any(
        other.tok_start <= c.tok_start
        and c.tok_end <= other.tok_end
        and (other.tok_start, other.tok_end) != (c.tok_start, c.tok_end)
        for other in candidates
    )


def _to_match(question: str, c: _Candidate) -> EntityMatch:
    return EntityMatch(
        surface=question[c.char_start : c.char_end],
        start=c.char_start,
        end=c.char_end,
        entity_id=c.entity_id,
        name=c.name,
    )


def _near_misses(words: list[str], names: list[str], limit: int = 5) -> list[str]:
    """Dictionary names resembling any question word, for error payloads."""
    scored: dict[str, float] = {}
    for word in words:
        if len(word) < 4:
            continue
        for name in difflib.get_close_matches(word, names, n=limit, cutoff=0.75):
            ratio = difflib.SequenceMatcher(None, word, name).ratio()
            if ratio > scored.get(name, 0.0):
                scored[name] = ratio
    return [n for n, _ in sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))][
        :limit
    ]
