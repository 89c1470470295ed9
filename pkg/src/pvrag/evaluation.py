"""Balanced benchmark construction, batch evaluation, and reporting.

The benchmark pairs each eligible drug (at least ten known side effects)
with ten sampled known effects and ten sampled non-effects. Sampling is
driven by one portable RNG stream per drug, keyed by the global seed and
the drug id, so a dataset is byte-reproducible for a given (KB, seed)
and a drug's draws do not shift when unrelated rows are added.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, EmptyMatrix, MalformedRow, NoEligibleDrugs, PvragError
from .kb import KnowledgeBase
from .pipeline import PipelineResources, run_query
from .prompts import build_question
from .rng import stream_for

POSITIVE = "positive"
NEGATIVE = "negative"
PER_DRUG = 10
METRIC_NAMES = ("accuracy", "f1", "precision", "sensitivity", "specificity")
GROUPINGS = ("atc_level1", "soc")
DATASET_FILE_VERSION = 1
REPORT_SCHEMA_VERSION = 1

PIPELINE_LABELS = {
    "rag_a": "RAG-A",
    "rag_b": "RAG-B",
    "graphrag": "GraphRAG",
    "baseline": "Baseline",
}


@dataclass(frozen=True)
class EvalPair:
    drug_id: str
    term_id: str
    label: str  # POSITIVE or NEGATIVE


@dataclass(frozen=True)
class EvalDataset:
    seed: int
    kb_fingerprint: str
    pairs: tuple[EvalPair, ...]

    def drug_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for pair in self.pairs:
            seen.setdefault(pair.drug_id, None)
        return list(seen)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class PairRecord:
    pair: EvalPair
    decision: str
    associated: bool
    correct: bool
    latency_ms: float


@dataclass(frozen=True)
class PairFailure:
    pair: EvalPair
    code: str
    message: str


@dataclass(frozen=True)
class EvalRun:
    pipeline: str
    matrix: ConfusionMatrix
    records: tuple[PairRecord, ...]
    failures: tuple[PairFailure, ...]


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    f1: float
    precision: float
    sensitivity: float
    specificity: float
    flags: tuple[str, ...]
    matrix: ConfusionMatrix
    pipeline: str | None = None
    seed: int | None = None
    kb_fingerprint: str | None = None
    groups: Mapping[str, Mapping[str, "MetricsReport"]] = field(default_factory=dict)
    records: tuple[PairRecord, ...] = ()
    failures: tuple[PairFailure, ...] = ()

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)


# --- dataset ----------------------------------------------------------------


def eligible_drug_ids(kb: KnowledgeBase, per_drug: int = PER_DRUG) -> list[str]:
    """Drugs with enough known side effects for a balanced sample, in the
    deterministic dataset order (drug name, then id)."""
    n_terms = len(kb.terms)
    out = [
        drug_id
        for drug_id, term_ids in kb.adjacency.items()
        if len(term_ids) >= per_drug and n_terms - len(term_ids) >= per_drug
    ]
    out.sort(key=lambda d: (kb.drugs[d].name, d))
    return out


def build_balanced_dataset(
    kb: KnowledgeBase, seed: int, per_drug: int = PER_DRUG
) -> EvalDataset:
    all_term_ids = sorted(kb.terms, key=lambda t: (kb.terms[t].name, t))
    pairs: list[EvalPair] = []
    for drug_id in eligible_drug_ids(kb, per_drug):
        known = kb.adjacency[drug_id]
        known_set = set(known)
        pool = [t for t in all_term_ids if t not in known_set]
        rng = stream_for(seed, drug_id)
        for term_id in rng.sample(list(known), per_drug):
            pairs.append(EvalPair(drug_id, term_id, POSITIVE))
        for term_id in rng.sample(pool, per_drug):
            pairs.append(EvalPair(drug_id, term_id, NEGATIVE))
    if not pairs:
        raise NoEligibleDrugs(
            f"no drug has at least {per_drug} side effects plus {per_drug} non-effects"
        )
    return EvalDataset(seed=seed, kb_fingerprint=kb.fingerprint, pairs=tuple(pairs))


def dumps_dataset(dataset: EvalDataset) -> str:
    """Canonical JSON Lines rendering; equal datasets give equal bytes."""
    lines = [
        json.dumps(
            {
                "record": "header",
                "version": DATASET_FILE_VERSION,
                "seed": dataset.seed,
                "kb_fingerprint": dataset.kb_fingerprint,
                "pairs": len(dataset.pairs),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for pair in dataset.pairs:
        lines.append(
            json.dumps(
                {"drug_id": pair.drug_id, "term_id": pair.term_id, "label": pair.label},
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


def write_dataset_jsonl(dataset: EvalDataset, path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(dataset), encoding="utf-8")


def read_dataset_jsonl(path: str | Path) -> EvalDataset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedRow(1, "empty dataset file")
    header = json.loads(lines[0])
    if header.get("record") != "header":
        raise MalformedRow(1, "first record must be the header")
    if header.get("version") != DATASET_FILE_VERSION:
        raise MalformedRow(1, f"unsupported dataset version {header.get('version')!r}")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = json.loads(line)
        try:
            pair = EvalPair(row["drug_id"], row["term_id"], row["label"])
        except KeyError as exc:
            raise MalformedRow(lineno, f"missing field {exc.args[0]!r}") from exc
        if pair.label not in (POSITIVE, NEGATIVE):
            raise MalformedRow(lineno, f"bad label {pair.label!r}")
        pairs.append(pair)
    if header.get("pairs") != len(pairs):
        raise MalformedRow(1, "header pair count does not match body")
    return EvalDataset(
        seed=header["seed"],
        kb_fingerprint=header["kb_fingerprint"],
        pairs=tuple(pairs),
    )


# --- evaluation -------------------------------------------------------------


def _cell(label: str, decision: str) -> str:
    predicted_yes = decision == "YES"
    if label == POSITIVE:
        return "tp" if predicted_yes else "fn"
    return "fp" if predicted_yes else "tn"


def matrix_from_records(records: Iterable[PairRecord]) -> ConfusionMatrix:
    counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for rec in records:
        counts[_cell(rec.pair.label, rec.decision)] += 1
    return ConfusionMatrix(**counts)


def run_eval(
    dataset: EvalDataset,
    pipeline: str,
    resources: PipelineResources,
    backend,
    parallelism: int = 4,
) -> EvalRun:
    """Run every dataset pair through one pipeline and tally the matrix.

    Individual pair failures (entity errors, unparseable completions,
    backend outages) are collected and excluded from the matrix rather
    than coerced to NO; coercion would silently inflate specificity.
    Output order is the dataset order regardless of parallelism.
    """
    kb = resources.kb
    if dataset.kb_fingerprint != kb.fingerprint:
        raise ConfigError(
            "dataset was built from a different knowledge base "
            f"(dataset {dataset.kb_fingerprint[:12]}…, loaded {kb.fingerprint[:12]}…)"
        )

    def one(indexed: tuple[int, EvalPair]):
        i, pair = indexed
        question = build_question(kb.terms[pair.term_id].name, kb.drugs[pair.drug_id].name)
        try:
            answer = run_query(question, pipeline, resources, backend)
        except PvragError as exc:
            return i, PairFailure(pair, exc.code, str(exc))
        predicted_yes = answer.decision == "YES"
        return i, PairRecord(
            pair=pair,
            decision=answer.decision,
            associated=answer.verdict.associated,
            correct=predicted_yes == (pair.label == POSITIVE),
            latency_ms=answer.latency_ms,
        )

    slots: list[PairRecord | PairFailure | None] = [None] * len(dataset.pairs)
    if parallelism <= 1:
        for item in enumerate(dataset.pairs):
            i, outcome = one(item)
            slots[i] = outcome
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for i, outcome in pool.map(one, enumerate(dataset.pairs)):
                slots[i] = outcome

    records = tuple(s for s in slots if isinstance(s, PairRecord))
    failures = tuple(s for s in slots if isinstance(s, PairFailure))
    return EvalRun(
        pipeline=pipeline,
        matrix=matrix_from_records(records),
        records=records,
        failures=failures,
    )


# --- metrics ----------------------------------------------------------------


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no evaluated pairs")
    flags: list[str] = []

    def ratio(name: str, num: int, den: int) -> float:
        if den == 0:
            flags.append(f"{name}: denominator 0, reported as 0.0")
            return 0.0
        return num / den

    accuracy = (cm.tp + cm.tn) / cm.total
    precision = ratio("precision", cm.tp, cm.tp + cm.fp)
    sensitivity = ratio("sensitivity", cm.tp, cm.tp + cm.fn)
    specificity = ratio("specificity", cm.tn, cm.tn + cm.fp)
    if precision + sensitivity == 0.0:
        flags.append("f1: denominator 0, reported as 0.0")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * sensitivity / (precision + sensitivity)
    return MetricsReport(
        accuracy=accuracy,
        f1=f1,
        precision=precision,
        sensitivity=sensitivity,
        specificity=specificity,
        flags=tuple(flags),
        matrix=cm,
    )


def group_breakdown(
    records: Iterable[PairRecord], kb: KnowledgeBase, grouping: str
) -> dict[str, ConfusionMatrix]:
    """Split records into labelled groups and tally one matrix per group.

    atc_level1 counts a pair once per level-1 class its drug holds, so a
    multi-code drug contributes to several groups; soc uses the term's
    organ class, with "unknown" for terms that came without one.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    counts: dict[str, dict[str, int]] = {}
    for rec in records:
        if grouping == "atc_level1":
            keys = sorted(kb.drugs[rec.pair.drug_id].atc_level1_classes())
        else:
            soc = kb.terms[rec.pair.term_id].soc_class
            keys = [soc if soc is not None else "unknown"]
        cell = _cell(rec.pair.label, rec.decision)
        for key in keys:
            counts.setdefault(key, {"tp": 0, "tn": 0, "fp": 0, "fn": 0})[cell] += 1
    return {key: ConfusionMatrix(**c) for key, c in sorted(counts.items())}


def build_report(
    run: EvalRun,
    kb: KnowledgeBase,
    seed: int | None = None,
    kb_fingerprint: str | None = None,
) -> MetricsReport:
    """Full report: overall metrics plus both group breakdowns."""
    overall = compute_metrics(run.matrix)
    groups: dict[str, dict[str, MetricsReport]] = {}
    for grouping in GROUPINGS:
        groups[grouping] = {
            name: compute_metrics(cm)
            for name, cm in group_breakdown(run.records, kb, grouping).items()
        }
    return MetricsReport(
        accuracy=overall.accuracy,
        f1=overall.f1,
        precision=overall.precision,
        sensitivity=overall.sensitivity,
        specificity=overall.specificity,
        flags=overall.flags,
        matrix=run.matrix,
        pipeline=run.pipeline,
        seed=seed,
        kb_fingerprint=kb_fingerprint,
        groups=groups,
        records=run.records,
        failures=run.failures,
    )


# --- report documents -------------------------------------------------------


def _matrix_dict(cm: ConfusionMatrix) -> dict:
    return {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn}


def _metrics_dict(report: MetricsReport) -> dict:
    return {name: report.metric(name) for name in METRIC_NAMES}


def report_to_dict(report: MetricsReport) -> dict:
    """Plain-data form of a report. Wall-clock values are deliberately
    left out so identical runs serialize to identical bytes."""
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "pipeline": report.pipeline,
        "seed": report.seed,
        "kb_fingerprint": report.kb_fingerprint,
        "matrix": _matrix_dict(report.matrix),
        "metrics": _metrics_dict(report),
        "flags": list(report.flags),
        "groups": {
            grouping: {
                name: {
                    "matrix": _matrix_dict(sub.matrix),
                    "metrics": _metrics_dict(sub),
                    "flags": list(sub.flags),
                }
                for name, sub in sorted(groups.items())
            }
            for grouping, groups in sorted(report.groups.items())
        },
        "records": [
            {
                "drug_id": rec.pair.drug_id,
                "term_id": rec.pair.term_id,
                "label": rec.pair.label,
                "decision": rec.decision,
                "associated": rec.associated,
                "correct": rec.correct,
            }
            for rec in report.records
        ],
        "failures": [
            {
                "drug_id": f.pair.drug_id,
                "term_id": f.pair.term_id,
                "label": f.pair.label,
                "code": f.code,
                "message": f.message,
            }
            for f in report.failures
        ],
    }


def _emit_json(report: MetricsReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def _emit_csv(report: MetricsReport) -> str:
    lines = ["group,metric,value"]

    def rows(group_name: str, source: MetricsReport) -> None:
        for metric in METRIC_NAMES:
            lines.append(f"{group_name},{metric},{source.metric(metric):.6f}")

    rows("overall", report)
    for grouping in sorted(report.groups):
        for name in sorted(report.groups[grouping]):
            rows(f"{grouping}:{name}", report.groups[grouping][name])
    return "\n".join(lines) + "\n"


def _emit_markdown(report: MetricsReport) -> str:
    label = PIPELINE_LABELS.get(report.pipeline or "", report.pipeline or "run")
    cells = " | ".join(f"{report.metric(name):.4f}" for name in METRIC_NAMES)
    lines = [
        "| System | Accuracy | F1 | Precision | Sensitivity | Specificity |",
        "| --- | --- | --- | --- | --- | --- |",
        f"| {label} | {cells} |",
        "",
        f"Pairs evaluated: {report.matrix.total}"
        + (f" (failures: {len(report.failures)})" if report.failures else ""),
    ]
    if report.flags:
        lines.append("Flags: " + "; ".join(report.flags))
    section_titles = {
        "atc_level1": "Accuracy by ATC level-1 class",
        "soc": "Accuracy by system organ class",
    }
    for grouping in GROUPINGS:
        groups = report.groups.get(grouping)
        if not groups:
            continue
        lines += [
            "",
            f"### {section_titles[grouping]}",
            "",
            "| Group | Pairs | Accuracy |",
            "| --- | --- | --- |",
        ]
        for name in sorted(groups):
            sub = groups[name]
            lines.append(f"| {name} | {sub.matrix.total} | {sub.accuracy:.4f} |")
    return "\n".join(lines) + "\n"


def emit_report(report: MetricsReport, fmt: str) -> str:
    if fmt == "json":
        return _emit_json(report)
    if fmt == "csv":
        return _emit_csv(report)
    if fmt == "markdown":
        return _emit_markdown(report)
    raise ValueError(f"format must be json, csv, or markdown, got {fmt!r}")
