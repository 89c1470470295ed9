"""Exact-scan cosine similarity index over corpus chunks.

No approximate structures: the corpus tops out around the size of the
full association table, where a vectorized exact scan is fast enough and
keeps downstream filter behavior reproducible. Entries stay in input
order; every query scores all of them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyCorpus,
    EmptyIndex,
    InvalidVector,
    ProviderFailure,
    ProviderMismatch,
)
from .kb import Chunk, KnowledgeBase, chunk_id_for, parse_format_a_line, parse_format_b_line

INDEX_FILE_VERSION = 1


def chunk_corpus(corpus: str, fmt: str, kb: KnowledgeBase) -> list[Chunk]:
    """Split rendered corpus text at newlines into retrievable chunks.

    One chunk per nonempty line; blank lines are dropped. Each line is
    parsed back to its drug (and term, for per-association lines) so the
    chunk carries canonical ids for downstream filtering.
    """
    if fmt not in ("A", "B"):
        raise ValueError(f"format must be 'A' or 'B', got {fmt!r}")
    chunks: list[Chunk] = []
    for line in corpus.split("\n"):
        if not line.strip():
            continue
        if fmt == "A":
            drug_name, _ = parse_format_a_line(line)
            drug = kb.drug_by_name(drug_name)
            if drug is None:
                raise EmptyCorpus(f"corpus line names unknown drug {drug_name!r}")
            chunks.append(
                Chunk(
                    chunk_id=chunk_id_for("A", drug.drug_id),
                    format="A",
                    drug_id=drug.drug_id,
                    term_id=None,
                    text=line + "\n",
                )
            )
        else:
            drug_name, se_name = parse_format_b_line(line)
            drug = kb.drug_by_name(drug_name)
            term = kb.term_by_name(se_name)
            if drug is None or term is None:
                raise EmptyCorpus(f"corpus line names unknown entities: {line[:80]!r}")
            chunks.append(
                Chunk(
                    chunk_id=chunk_id_for("B", drug.drug_id, term.term_id),
                    format="B",
                    drug_id=drug.drug_id,
                    term_id=term.term_id,
                    text=line + "\n",
                )
            )
    if not chunks:
        raise EmptyCorpus("corpus contains no nonempty lines")
    return chunks


@dataclass(frozen=True)
class VectorIndex:
    dimension: int
    provider_fingerprint: str
    chunks: tuple[Chunk, ...]
    matrix: np.ndarray  # unit rows, shape (len(chunks), dimension)

    def __len__(self) -> int:
        return len(self.chunks)


def _validate_vector(vec: Sequence[float], dimension: int, label: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dimension:
        raise DimensionMismatch(
            f"{label}: expected dimension {dimension}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidVector(f"{label}: non-finite entries")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise InvalidVector(f"{label}: zero vector")
    return arr / norm


def build_index(chunks: Sequence[Chunk], provider) -> VectorIndex:
    """Embed every chunk and assemble the index, aborting on any failure."""
    if not chunks:
        raise EmptyCorpus("no chunks to index")
    ids = [c.chunk_id for c in chunks]
    if len(set(ids)) != len(ids):
        raise ProviderFailure(ids[0], "duplicate chunk_ids in input")
    try:
        vectors = provider.embed([c.text for c in chunks])
    except (DimensionMismatch, InvalidVector, ProviderFailure):
        raise
    except Exception as exc:
        raise ProviderFailure(chunks[0].chunk_id, str(exc))
    if len(vectors) != len(chunks):
        raise ProviderFailure(
            chunks[0].chunk_id,
            f"provider returned {len(vectors)} vectors for {len(chunks)} chunks",
        )
    rows = [
        _validate_vector(vec, provider.dimension, chunk.chunk_id)
        for chunk, vec in zip(chunks, vectors)
    ]
    matrix = np.vstack(rows)
    return VectorIndex(
        dimension=provider.dimension,
        provider_fingerprint=provider.fingerprint,
        chunks=tuple(chunks),
        matrix=matrix,
    )


def top_k(
    index: VectorIndex, query_vector: Sequence[float], k: int = 5
) -> list[tuple[Chunk, float]]:
    """The k most cosine-similar chunks, ties broken by ascending chunk_id."""
    if len(index) == 0:
        raise EmptyIndex("index has no entries")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _validate_vector(query_vector, index.dimension, "query")
    scores = index.matrix @ q
    order = sorted(
        range(len(index)), key=lambda i: (-scores[i], index.chunks[i].chunk_id)
    )
    out = []
    for i in order[: min(k, len(index))]:
        score = max(-1.0, min(1.0, float(scores[i])))
        out.append((index.chunks[i], score))
    return out


def search(
    index: VectorIndex, provider, text: str, k: int = 5
) -> list[tuple[Chunk, float]]:
    """Embed a query with the index's own provider and run top_k."""
    if provider.fingerprint != index.provider_fingerprint:
        raise ProviderMismatch(
            f"index built with {index.provider_fingerprint!r}, "
            f"query embedded with {provider.fingerprint!r}"
        )
    return top_k(index, provider.embed([text])[0], k)


# --- persistence ---------------------------------------------------------------


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Versioned JSON Lines: one header record, then one record per entry."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            json.dumps(
                {
                    "version": INDEX_FILE_VERSION,
                    "dimension": index.dimension,
                    "provider_fingerprint": index.provider_fingerprint,
                    "count": len(index),
                },
                sort_keys=True,
            )
            + "\n"
        )
        for chunk, row in zip(index.chunks, index.matrix):
            fh.write(
                json.dumps(
                    {
                        "chunk_id": chunk.chunk_id,
                        "format": chunk.format,
                        "drug_id": chunk.drug_id,
                        "term_id": chunk.term_id,
                        "text": chunk.text,
                        "vector": row.tolist(),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise EmptyIndex(f"{path}: empty index file")
        header = json.loads(header_line)
        if header.get("version") != INDEX_FILE_VERSION:
            raise EmptyIndex(
                f"{path}: unsupported index version {header.get('version')!r}"
            )
        dimension = int(header["dimension"])
        chunks: list[Chunk] = []
        rows: list[np.ndarray] = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(
                Chunk(
                    chunk_id=rec["chunk_id"],
                    format=rec["format"],
                    drug_id=rec["drug_id"],
                    term_id=rec.get("term_id"),
                    text=rec["text"],
                )
            )
            arr = np.asarray(rec["vector"], dtype=np.float64)
            if arr.shape != (dimension,):
                raise DimensionMismatch(
                    f"{path}: entry {rec['chunk_id']} has dimension {arr.shape}"
                )
            rows.append(arr)
    if len(chunks) != int(header["count"]):
        raise EmptyIndex(
            f"{path}: header count {header['count']} != {len(chunks)} entries"
        )
    if not chunks:
        raise EmptyIndex(f"{path}: index file has no entries")
    return VectorIndex(
        dimension=dimension,
        provider_fingerprint=header["provider_fingerprint"],
        chunks=tuple(chunks),
        matrix=np.vstack(rows),
    )


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Plain cosine similarity of two raw vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    na, nb = float(np.linalg.norm(va)), float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise InvalidVector("cosine of zero vector")
    val = float(va @ vb) / (na * nb)
    if math.isnan(val):
        raise InvalidVector("cosine produced NaN")
    return max(-1.0, min(1.0, val))
