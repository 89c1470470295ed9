"""Vector index tests.

top_k is validated against a brute-force oracle written in plain Python
(math.fsum arithmetic, no shared code with the index implementation).
"""

from __future__ import annotations

import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvrag.backends import HashingEmbedder
from pvrag.errors import (
    DimensionMismatch,
    EmptyCorpus,
    EmptyIndex,
    InvalidVector,
    ProviderFailure,
    ProviderMismatch,
)
from pvrag.index import (
    build_index,
    chunk_corpus,
    cosine,
    load_index,
    save_index,
    search,
    top_k,
)
from pvrag.kb import Chunk, corpus_text, export_corpus, load_tsv
from pvrag.rng import SplitMix64

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "mini_sider.tsv"


@pytest.fixture(scope="module")
def kb():
    return load_tsv(FIXTURE)


# --- brute force oracle -----------------------------------------------------


def brute_force(entries, query, k):
    """(chunk_id, score) list by full-scan cosine, pure Python."""
    qn = math.sqrt(math.fsum(x * x for x in query))
    scored = []
    for chunk_id, vec in entries:
        vn = math.sqrt(math.fsum(x * x for x in vec))
        dot = math.fsum(a * b for a, b in zip(query, vec))
        scored.append((dot / (vn * qn), chunk_id))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(cid, s) for s, cid in scored[:k]]


def random_vector(rng: SplitMix64, dim: int) -> list[float]:
    return [(rng.next_u64() >> 11) / float(1 << 53) * 2.0 - 1.0 for _ in range(dim)]


class ListProvider:
    """Provider stub returning pre-baked vectors keyed by chunk text."""

    def __init__(self, table: dict[str, list[float]], dimension: int):
        self.table = table
        self.dimension = dimension
        self.fingerprint = f"list/v1?dim={dimension}"

    def embed(self, texts):
        return [list(self.table[t]) for t in texts]


def make_random_index(n_chunks=200, dim=48, seed=7):
    rng = SplitMix64(seed)
    chunks = [
        Chunk(chunk_id=f"c{i:04d}", format="B", drug_id=f"d{i}", term_id=f"t{i}",
              text=f"text {i}\n")
        for i in range(n_chunks)
    ]
    table = {c.text: random_vector(rng, dim) for c in chunks}
    provider = ListProvider(table, dim)
    return build_index(chunks, provider), table, rng


# --- chunking -----------------------------------------------------------------


def test_chunk_corpus_one_chunk_per_line(kb):
    chunks_a = export_corpus(kb, "A")
    rechunked = chunk_corpus(corpus_text(chunks_a), "A", kb)
    assert rechunked == chunks_a
    chunks_b = export_corpus(kb, "B")
    assert chunk_corpus(corpus_text(chunks_b), "B", kb) == chunks_b


def test_chunk_corpus_drops_blank_lines(kb):
    chunks = export_corpus(kb, "A")
    noisy = "\n\n" + corpus_text(chunks).replace("\n", "\n\n") + "\n\n"
    assert chunk_corpus(noisy, "A", kb) == chunks


def test_chunk_corpus_concatenation_round_trip(kb):
    chunks = export_corpus(kb, "B")
    assert corpus_text(chunk_corpus(corpus_text(chunks), "B", kb)) == corpus_text(
        chunks
    )


def test_chunk_corpus_empty_rejected(kb):
    with pytest.raises(EmptyCorpus):
        chunk_corpus("\n\n  \n", "A", kb)


def test_chunk_corpus_unknown_entities_rejected(kb):
    with pytest.raises(EmptyCorpus):
        chunk_corpus(
            "The drug nothere causes the following side effects or adverse "
            "reactions: rash\n",
            "A",
            kb,
        )


# --- build -------------------------------------------------------------------


def test_build_index_entry_per_chunk():
    index, _, _ = make_random_index(50)
    assert len(index) == 50


def test_build_index_rejects_duplicates():
    chunk = Chunk("dup", "B", "d", "t", "text\n")
    provider = ListProvider({"text\n": [1.0, 0.0]}, 2)
    with pytest.raises(ProviderFailure):
        build_index([chunk, chunk], provider)


def test_build_index_rejects_zero_vector():
    chunk = Chunk("c1", "B", "d", "t", "text\n")
    provider = ListProvider({"text\n": [0.0, 0.0]}, 2)
    with pytest.raises(InvalidVector):
        build_index([chunk], provider)


def test_build_index_rejects_non_finite():
    chunk = Chunk("c1", "B", "d", "t", "text\n")
    provider = ListProvider({"text\n": [float("nan"), 1.0]}, 2)
    with pytest.raises(InvalidVector):
        build_index([chunk], provider)


def test_build_index_rejects_wrong_dimension():
    chunk = Chunk("c1", "B", "d", "t", "text\n")
    provider = ListProvider({"text\n": [1.0, 2.0, 3.0]}, 2)
    with pytest.raises(DimensionMismatch):
        build_index([chunk], provider)


def test_build_index_wraps_provider_crash():
    class Exploding:
        dimension = 2
        fingerprint = "boom"

        def embed(self, texts):
            raise RuntimeError("no service")

    with pytest.raises(ProviderFailure) as exc:
        build_index([Chunk("c1", "B", "d", "t", "x\n")], Exploding())
    assert exc.value.chunk_id == "c1"


def test_build_index_empty_rejected():
    with pytest.raises(EmptyCorpus):
        build_index([], ListProvider({}, 2))


# --- top_k ---------------------------------------------------------------------


def test_self_similarity_first():
    index, table, _ = make_random_index(40)
    some_text = "text 7\n"
    hits = top_k(index, table[some_text], k=3)
    assert hits[0][0].text == some_text
    assert hits[0][1] == pytest.approx(1.0, abs=1e-9)


def test_k_larger_than_index():
    index, table, _ = make_random_index(10)
    hits = top_k(index, table["text 0\n"], k=50)
    assert len(hits) == 10
    scores = [s for _, s in hits]
    assert scores == sorted(scores, reverse=True)


def test_scores_clamped_to_unit_interval():
    index, table, rng = make_random_index(30)
    for _ in range(20):
        hits = top_k(index, random_vector(rng, 48), k=30)
        assert all(-1.0 <= s <= 1.0 for s in hits for s in [s[1]])


def test_ties_broken_by_chunk_id():
    vec = [1.0, 2.0, 3.0]
    chunks = [Chunk(f"c{i}", "B", f"d{i}", f"t{i}", f"x{i}\n") for i in range(4)]
    # two identical vectors and one scaled copy: all three tie at cos=1
    table = {
        "x0\n": [2.0, 4.0, 6.0],
        "x1\n": list(vec),
        "x2\n": list(vec),
        "x3\n": [-3.0, 1.0, 0.2],
    }
    index = build_index(chunks, ListProvider(table, 3))
    hits = top_k(index, vec, k=4)
    assert [h[0].chunk_id for h in hits[:3]] == ["c0", "c1", "c2"]


def test_thousand_random_queries_match_brute_force():
    index, table, rng = make_random_index(200)
    entries = [(c.chunk_id, table[c.text]) for c in index.chunks]
    for _ in range(1000):
        query = random_vector(rng, 48)
        k = 1 + rng.below(10)
        expected = brute_force(entries, query, k)
        got = top_k(index, query, k)
        assert [c.chunk_id for c, _ in got] == [cid for cid, _ in expected]
        for (_, score), (_, want) in zip(got, expected):
            assert abs(score - want) <= 1e-9


def test_empty_index_rejected():
    index, table, _ = make_random_index(5)
    empty = type(index)(
        dimension=index.dimension,
        provider_fingerprint=index.provider_fingerprint,
        chunks=(),
        matrix=index.matrix[:0],
    )
    with pytest.raises(EmptyIndex):
        top_k(empty, table["text 0\n"], k=1)


def test_query_dimension_checked():
    index, _, _ = make_random_index(5)
    with pytest.raises(DimensionMismatch):
        top_k(index, [1.0] * 64, k=1)


def test_search_rejects_provider_mismatch(kb):
    chunks = export_corpus(kb, "B")[:10]
    emb = HashingEmbedder(dimension=128)
    index = build_index(chunks, emb)
    other = HashingEmbedder(dimension=128, seed=5)
    with pytest.raises(ProviderMismatch):
        search(index, other, "aspirin urticaria")
    hits = search(index, emb, chunks[0].text, k=1)
    assert hits[0][0].chunk_id == chunks[0].chunk_id


# --- cosine properties -----------------------------------------------------------


@given(st.integers(0, 2**62), st.integers(2, 5))
@settings(max_examples=100, deadline=None)
def test_cosine_symmetry_and_scale_invariance(seed, scale):
    rng = SplitMix64(seed)
    a = random_vector(rng, 16)
    b = random_vector(rng, 16)
    assert cosine(a, b) == pytest.approx(cosine(b, a), abs=1e-12)
    scaled = [x * scale for x in b]
    assert cosine(a, scaled) == pytest.approx(cosine(a, b), abs=1e-12)


def test_cosine_zero_vector_rejected():
    with pytest.raises(InvalidVector):
        cosine([0.0, 0.0], [1.0, 0.0])


# --- fixture retrieval quality ----------------------------------------------------


def test_query_ranks_gold_line_above_95_percent(kb):
    """"aspirin urticaria" must beat >= 95% of all other corpus lines."""
    emb = HashingEmbedder()
    chunks = export_corpus(kb, "A") + export_corpus(kb, "B")
    index = build_index(chunks, emb)
    aspirin = kb.drug_by_name("aspirin")
    urticaria = kb.term_by_name("urticaria")
    gold_id = None
    for c in chunks:
        if c.format == "B" and c.drug_id == aspirin.drug_id and c.term_id == urticaria.term_id:
            gold_id = c.chunk_id
    assert gold_id is not None
    hits = top_k(index, emb.embed_one("aspirin urticaria"), k=len(chunks))
    rank = [c.chunk_id for c, _ in hits].index(gold_id)
    assert rank <= math.floor(0.05 * (len(chunks) - 1)), rank


def test_gold_line_is_strictly_closest(kb):
    emb = HashingEmbedder()
    chunks = export_corpus(kb, "B")
    index = build_index(chunks, emb)
    hits = top_k(index, emb.embed_one("aspirin urticaria"), k=2)
    top, runner_up = hits
    aspirin = kb.drug_by_name("aspirin")
    urticaria = kb.term_by_name("urticaria")
    assert top[0].drug_id == aspirin.drug_id
    assert top[0].term_id == urticaria.term_id
    assert top[1] > runner_up[1]


# --- persistence -------------------------------------------------------------------


def test_save_load_round_trip(tmp_path, kb):
    emb = HashingEmbedder(dimension=96)
    chunks = export_corpus(kb, "B")[:25]
    index = build_index(chunks, emb)
    path = tmp_path / "index.jsonl"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.provider_fingerprint == index.provider_fingerprint
    assert loaded.chunks == index.chunks
    query = emb.embed_one("aspirin urticaria")
    assert top_k(loaded, query, 5) == top_k(index, query, 5)


def test_rebuild_serializes_identically(tmp_path, kb):
    emb = HashingEmbedder(dimension=96)
    chunks = export_corpus(kb, "B")[:25]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_index(build_index(chunks, emb), p1)
    save_index(build_index(chunks, emb), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_save_load_save_identical(tmp_path, kb):
    emb = HashingEmbedder(dimension=96)
    chunks = export_corpus(kb, "B")[:25]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    index = build_index(chunks, emb)
    save_index(index, p1)
    save_index(load_index(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_rejects_corrupt_header(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"version": 99, "dimension": 2, "count": 0}\n')
    with pytest.raises(EmptyIndex):
        load_index(path)


def test_load_rejects_count_mismatch(tmp_path, kb):
    emb = HashingEmbedder(dimension=32)
    index = build_index(export_corpus(kb, "B")[:3], emb)
    path = tmp_path / "trunc.jsonl"
    save_index(index, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(EmptyIndex):
        load_index(path)
