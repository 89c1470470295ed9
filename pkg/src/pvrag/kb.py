"""Knowledge base ingestion and text corpus rendering.

Input is a tab-separated association table with a required header::

    drug_id\tdrug_name\tatc_codes\tterm_type\tterm_id\tterm_name\tsoc_class

- ``atc_codes``: semicolon-separated ATC codes; rows with an empty field are
  dropped (only drugs with known ATC classifications are kept).
- ``term_type``: only ``PT`` rows (MedDRA Preferred Terms) are kept.
- ``soc_class``: optional System Organ Class label; the column may be empty
  or omitted entirely.

Names are canonicalized to lowercase with collapsed whitespace so that
entity recognition and graph lookups can match on exact strings. Duplicate
(drug, term) rows collapse silently: source exports commonly list the same
pair at several MedDRA levels and only unique pairs count.

The ingested KnowledgeBase is immutable and safe for unrestricted
concurrent reads.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    EmptyResult,
    MalformedRow,
    NoAssociations,
    UnknownAssociation,
    UnknownDrug,
)

TSV_HEADER = (
    "drug_id",
    "drug_name",
    "atc_codes",
    "term_type",
    "term_id",
    "term_name",
    "soc_class",
)

ATC_LEVEL1_LETTERS = frozenset("ABCDGHJLMNPRSV")

FORMAT_A_PREFIX = "The drug "
FORMAT_A_MARKER = " causes the following side effects or adverse reactions: "
FORMAT_B_MARKER = " may cause "
FORMAT_B_SUFFIX = " as an adverse effect, adverse reaction, or side effect."

_FORMAT_A_RE = re.compile(
    r"^The drug (?P<drug>.+?) causes the following side effects or adverse "
    r"reactions: (?P<tail>.+?)\n?$"
)
_FORMAT_B_RE = re.compile(
    r"^The drug (?P<drug>.+?) may cause (?P<se>.+?) as an adverse effect, "
    r"adverse reaction, or side effect\.\n?$"
)


def canonical_name(raw: str) -> str:
    """Lowercase and collapse internal whitespace."""
    return " ".join(raw.split()).lower()


@dataclass(frozen=True)
class DrugRecord:
    drug_id: str
    name: str
    atc_codes: tuple[str, ...]

    def atc_level1_classes(self) -> tuple[str, ...]:
        """Distinct ATC level-1 letters, sorted."""
        return tuple(sorted({code[0] for code in self.atc_codes}))


@dataclass(frozen=True)
class SideEffectTerm:
    term_id: str
    name: str
    soc_class: str | None = None


@dataclass(frozen=True, order=True)
class Association:
    drug_id: str
    term_id: str


@dataclass(frozen=True)
class Chunk:
    """One retrievable text unit of the rendered corpus."""

    chunk_id: str
    format: str  # "A" or "B"
    drug_id: str
    term_id: str | None
    text: str


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable drug / side-effect association store.

    ``adjacency`` maps each drug_id to its term_ids ordered by term name,
    which fixes the rendering order of Format A lists and all exports.
    """

    drugs: dict[str, DrugRecord]
    terms: dict[str, SideEffectTerm]
    associations: frozenset[Association]
    adjacency: dict[str, tuple[str, ...]]
    drug_id_by_name: dict[str, str]
    term_id_by_name: dict[str, str]
    _fingerprint_cache: list = field(default_factory=list, repr=False, compare=False)

    def drug_by_name(self, name: str) -> DrugRecord | None:
        drug_id = self.drug_id_by_name.get(canonical_name(name))
        return self.drugs[drug_id] if drug_id is not None else None

    def term_by_name(self, name: str) -> SideEffectTerm | None:
        term_id = self.term_id_by_name.get(canonical_name(name))
        return self.terms[term_id] if term_id is not None else None

    def has_association(self, drug_id: str, term_id: str) -> bool:
        return Association(drug_id, term_id) in self.associations

    def side_effect_names(self, drug_id: str) -> tuple[str, ...]:
        return tuple(self.terms[t].name for t in self.adjacency.get(drug_id, ()))

    @property
    def fingerprint(self) -> str:
        """Stable content hash over the canonical serialized form."""
        if not self._fingerprint_cache:
            digest = hashlib.sha256(
                json.dumps(self._canonical_form(), sort_keys=True).encode("utf-8")
            ).hexdigest()
            self._fingerprint_cache.append(digest)
        return self._fingerprint_cache[0]

    def _canonical_form(self) -> dict:
        return {
            "drugs": [
                [d.drug_id, d.name, list(d.atc_codes)]
                for d in sorted(self.drugs.values(), key=lambda d: d.drug_id)
            ],
            "terms": [
                [t.term_id, t.name, t.soc_class]
                for t in sorted(self.terms.values(), key=lambda t: t.term_id)
            ],
            "associations": sorted([a.drug_id, a.term_id] for a in self.associations),
        }


def parse_association_table(rows: Iterable[Sequence[str]]) -> KnowledgeBase:
    """Build a KnowledgeBase from tabular records.

    Each row carries (drug_id, drug_name, atc_codes, term_type, term_id,
    term_name[, soc_class]). Rows lacking ATC codes or with a non-PT term
    type are dropped; duplicate (drug, term) pairs collapse.

    Raises:
        MalformedRow: syntactically invalid row, or a row that would break
            a KB invariant (conflicting names/ids), with its 1-based index.
        EmptyResult: every row was filtered out.
    """
    drugs: dict[str, DrugRecord] = {}
    terms: dict[str, SideEffectTerm] = {}
    pairs: set[Association] = set()
    drug_id_by_name: dict[str, str] = {}
    term_id_by_name: dict[str, str] = {}

    for line_no, row in enumerate(rows, start=1):
        fields = [str(f) for f in row]
        if len(fields) == len(TSV_HEADER) - 1:
            fields.append("")  # soc_class column omitted
        if len(fields) != len(TSV_HEADER):
            raise MalformedRow(
                line_no, f"expected {len(TSV_HEADER)} fields, got {len(fields)}"
            )
        drug_id, raw_drug, raw_atc, term_type, term_id, raw_term, raw_soc = (
            f.strip() for f in fields
        )

        if term_type.upper() != "PT":
            continue
        if not raw_atc:
            continue  # only drugs with known ATC classifications are kept

        if not drug_id:
            raise MalformedRow(line_no, "empty drug_id")
        if not term_id:
            raise MalformedRow(line_no, "empty term_id")
        drug_name = canonical_name(raw_drug)
        term_name = canonical_name(raw_term)
        if not drug_name:
            raise MalformedRow(line_no, "empty drug name")
        if not term_name:
            raise MalformedRow(line_no, "empty term name")

        atc_codes = tuple(
            sorted({code.strip().upper() for code in raw_atc.split(";") if code.strip()})
        )
        for code in atc_codes:
            if code[0] not in ATC_LEVEL1_LETTERS:
                raise MalformedRow(line_no, f"invalid ATC code {code!r}")

        soc = canonical_name(raw_soc) if raw_soc else None

        existing_drug = drugs.get(drug_id)
        if existing_drug is None:
            if drug_name in drug_id_by_name:
                raise MalformedRow(
                    line_no,
                    f"drug name {drug_name!r} already mapped to id "
                    f"{drug_id_by_name[drug_name]!r}",
                )
            drugs[drug_id] = DrugRecord(drug_id, drug_name, atc_codes)
            drug_id_by_name[drug_name] = drug_id
        else:
            if existing_drug.name != drug_name:
                raise MalformedRow(
                    line_no,
                    f"drug {drug_id!r} renamed {existing_drug.name!r} -> {drug_name!r}",
                )
            if existing_drug.atc_codes != atc_codes:
                merged = tuple(sorted(set(existing_drug.atc_codes) | set(atc_codes)))
                drugs[drug_id] = DrugRecord(drug_id, drug_name, merged)

        existing_term = terms.get(term_id)
        if existing_term is None:
            if term_name in term_id_by_name:
                raise MalformedRow(
                    line_no,
                    f"term name {term_name!r} already mapped to id "
                    f"{term_id_by_name[term_name]!r}",
                )
            terms[term_id] = SideEffectTerm(term_id, term_name, soc)
            term_id_by_name[term_name] = term_id
        else:
            if existing_term.name != term_name:
                raise MalformedRow(
                    line_no,
                    f"term {term_id!r} renamed {existing_term.name!r} -> {term_name!r}",
                )
            if existing_term.soc_class is None and soc is not None:
                terms[term_id] = SideEffectTerm(term_id, term_name, soc)

        pairs.add(Association(drug_id, term_id))

    if not pairs:
        raise EmptyResult("all rows were filtered out")

    adjacency = _build_adjacency(pairs, terms)
    return KnowledgeBase(
        drugs=drugs,
        terms=terms,
        associations=frozenset(pairs),
        adjacency=adjacency,
        drug_id_by_name=drug_id_by_name,
        term_id_by_name=term_id_by_name,
    )


def _build_adjacency(
    pairs: set[Association], terms: dict[str, SideEffectTerm]
) -> dict[str, tuple[str, ...]]:
    by_drug: dict[str, list[str]] = {}
    for assoc in pairs:
        by_drug.setdefault(assoc.drug_id, []).append(assoc.term_id)
    return {
        drug_id: tuple(sorted(term_ids, key=lambda t: (terms[t].name, t)))
        for drug_id, term_ids in by_drug.items()
    }


def load_tsv(path: str | Path) -> KnowledgeBase:
    """Load a KnowledgeBase from a TSV file with the documented header."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EmptyResult(f"{path}: empty file")
    header = tuple(h.strip() for h in lines[0].split("\t"))
    if header not in (TSV_HEADER, TSV_HEADER[:-1]):
        raise MalformedRow(1, f"unexpected header {header!r}")
    rows = [line.split("\t") for line in lines[1:] if line.strip()]
    try:
        return parse_association_table(rows)
    except MalformedRow as exc:
        # report the file line (data rows start after the header)
        raise MalformedRow(exc.line + 1, exc.reason) from None


def load_sider(
    meddra_all_se_path: str | Path,
    drug_atc_path: str | Path,
    drug_names_path: str | Path,
) -> KnowledgeBase:
    """Ingest raw SIDER 4.1 exports directly.

    Joins ``meddra_all_se.tsv`` (associations, headerless) with the
    ``drug_atc.tsv`` and ``drug_names.tsv`` sidecars on the flat compound
    id. Keeps PT rows for drugs that have both a name and at least one ATC
    code; SIDER carries no SOC column, so soc_class stays empty. A term
    name mapped to several MedDRA ids keeps the smallest id so name lookup
    stays injective.
    """
    atc_by_drug: dict[str, list[str]] = {}
    for fields in _read_headerless_tsv(drug_atc_path, 2):
        atc_by_drug.setdefault(fields[0], []).append(fields[1])
    name_by_drug: dict[str, str] = {}
    for fields in _read_headerless_tsv(drug_names_path, 2):
        name_by_drug[fields[0]] = fields[1]

    ids_by_name: dict[str, set[str]] = {}
    raw_pairs: list[tuple[str, str]] = []
    for fields in _read_headerless_tsv(meddra_all_se_path, 6):
        flat_id, _stereo, _label_cui, concept_type, meddra_cui, se_name = fields
        if concept_type.strip().upper() != "PT":
            continue
        if flat_id not in atc_by_drug or flat_id not in name_by_drug:
            continue
        name = canonical_name(se_name)
        ids_by_name.setdefault(name, set()).add(meddra_cui)
        raw_pairs.append((flat_id, name))

    # One id per name, injectively: smallest unclaimed CUI, names in sorted
    # order so the assignment never depends on file order.
    term_id_for_name: dict[str, str] = {}
    claimed: set[str] = set()
    for name in sorted(ids_by_name):
        free = sorted(ids_by_name[name] - claimed)
        term_id_for_name[name] = free[0] if free else f"T:{name}"
        claimed.add(term_id_for_name[name])

    rows = [
        (
            drug_id,
            name_by_drug[drug_id],
            ";".join(sorted(set(atc_by_drug[drug_id]))),
            "PT",
            term_id_for_name[name],
            name,
            "",
        )
        for drug_id, name in raw_pairs
    ]
    return parse_association_table(rows)


def _read_headerless_tsv(path: str | Path, n_fields: int) -> Iterable[list[str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < n_fields:
                continue
            yield fields[:n_fields]


# --- rendering ------------------------------------------------------------


def render_format_a(kb: KnowledgeBase, drug_id: str) -> str:
    """One aggregated sentence listing every side effect of the drug.

    Side effects appear in lexicographic name order for reproducible
    output. Names containing ``", "`` would make the comma-separated list
    ambiguous to parse back; canonical corpora avoid them.
    """
    drug = kb.drugs.get(drug_id)
    if drug is None:
        raise UnknownDrug(drug_id)
    names = kb.side_effect_names(drug_id)
    if not names:
        raise NoAssociations(drug_id)
    return f"{FORMAT_A_PREFIX}{drug.name}{FORMAT_A_MARKER}{', '.join(names)}\n"


def render_format_b(kb: KnowledgeBase, association: Association) -> str:
    """One sentence for a single drug / side-effect pair."""
    if association not in kb.associations:
        raise UnknownAssociation(f"{association.drug_id} -> {association.term_id}")
    drug = kb.drugs[association.drug_id].name
    se = kb.terms[association.term_id].name
    return f"{FORMAT_A_PREFIX}{drug}{FORMAT_B_MARKER}{se}{FORMAT_B_SUFFIX}\n"


def parse_format_a_line(text: str) -> tuple[str, list[str]]:
    """Inverse of render_format_a: (drug name, side-effect names)."""
    m = _FORMAT_A_RE.match(text)
    if m is None:
        raise ValueError(f"not a Format A line: {text[:80]!r}")
    return m.group("drug"), m.group("tail").split(", ")


def parse_format_b_line(text: str) -> tuple[str, str]:
    """Inverse of render_format_b: (drug name, side-effect name)."""
    m = _FORMAT_B_RE.match(text)
    if m is None:
        raise ValueError(f"not a Format B line: {text[:80]!r}")
    return m.group("drug"), m.group("se")


def chunk_id_for(fmt: str, drug_id: str, term_id: str | None = None) -> str:
    """Stable chunk identifier from the owning entity ids."""
    key = drug_id if term_id is None else f"{drug_id}\t{term_id}"
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).hexdigest()
    return f"{fmt}-{digest}"


def export_corpus(kb: KnowledgeBase, fmt: str) -> list[Chunk]:
    """Render the whole KB to an ordered chunk list.

    Format A: one chunk per drug with at least one association. Format B:
    one chunk per association. Ordering is (drug name, term name).
    """
    if fmt not in ("A", "B"):
        raise ValueError(f"format must be 'A' or 'B', got {fmt!r}")
    if not kb.drugs:
        raise EmptyResult("knowledge base has no drugs")
    drugs = sorted(kb.drugs.values(), key=lambda d: d.name)
    chunks: list[Chunk] = []
    for drug in drugs:
        term_ids = kb.adjacency.get(drug.drug_id, ())
        if not term_ids:
            continue
        if fmt == "A":
            chunks.append(
                Chunk(
                    chunk_id=chunk_id_for("A", drug.drug_id),
                    format="A",
                    drug_id=drug.drug_id,
                    term_id=None,
                    text=render_format_a(kb, drug.drug_id),
                )
            )
        else:
            for term_id in term_ids:  # already ordered by term name
                chunks.append(
                    Chunk(
                        chunk_id=chunk_id_for("B", drug.drug_id, term_id),
                        format="B",
                        drug_id=drug.drug_id,
                        term_id=term_id,
                        text=render_format_b(kb, Association(drug.drug_id, term_id)),
                    )
                )
    return chunks


def corpus_text(chunks: Sequence[Chunk]) -> str:
    """The corpus as plain text, one rendered line per chunk."""
    return "".join(chunk.text for chunk in chunks)


# --- serialization -----------------------------------------------------------


def write_corpus_jsonl(chunks: Sequence[Chunk], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for chunk in chunks:
            fh.write(
                json.dumps(
                    {
                        "chunk_id": chunk.chunk_id,
                        "format": chunk.format,
                        "drug_id": chunk.drug_id,
                        "term_id": chunk.term_id,
                        "text": chunk.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_corpus_jsonl(path: str | Path) -> list[Chunk]:
    chunks = []
    with Path(path).open("r", encoding="utf-8") as fh:
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
    return chunks


def save_kb(kb: KnowledgeBase, path: str | Path) -> None:
    """Persist the KB as canonical JSON (deterministic bytes)."""
    payload = kb._canonical_form()
    payload["version"] = 1
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def load_kb(path: str | Path) -> KnowledgeBase:
    with Path(path).open("r", encoding="utf-8") as fh:
        payload = json.load(fh)
    drugs = {d[0]: DrugRecord(d[0], d[1], tuple(d[2])) for d in payload["drugs"]}
    terms = {t[0]: SideEffectTerm(t[0], t[1], t[2]) for t in payload["terms"]}
    pairs = {Association(a[0], a[1]) for a in payload["associations"]}
    return KnowledgeBase(
        drugs=drugs,
        terms=terms,
        associations=frozenset(pairs),
        adjacency=_build_adjacency(pairs, terms),
        drug_id_by_name={d.name: d.drug_id for d in drugs.values()},
        term_id_by_name={t.name: t.term_id for t in terms.values()},
    )
