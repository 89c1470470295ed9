#!/usr/bin/env python3
"""Generate fixtures/mini_sider.tsv, the desk-scale association table.

The fixture is checked in; this script exists so it can be regenerated
deterministically and so its safety properties stay documented as code:

- ~60 drugs with 10..30 side effects each, plus a few below the dataset
  eligibility threshold, one drug without ATC codes (filtered on ingest),
  LLT rows (filtered), and one exact duplicate row (collapsed).
- aspirin carries two ATC codes and the {shock, peptic ulcer, contusion,
  urticaria} set; metformin carries headache. "ulcer" and "peptic ulcer"
  both exist as terms so nested-name matching is exercised: aspirin lists
  "peptic ulcer" but never bare "ulcer", naproxen lists bare "ulcer",
  diclofenac lists both.
- Entity names avoid every token the question / sentence templates use,
  and no name's token sequence occurs inside another name's tokens except
  the deliberate ("ulcer", "peptic ulcer") pair. This keeps dictionary
  extraction over templated questions exact.
- A shared set of very common side effects appears in every drug so the
  aggregated per-drug sentences are long and mutually similar.

Run from the repo root:  python scripts/make_fixture.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pvrag.kb import load_tsv  # noqa: E402
from pvrag.rng import stream_for  # noqa: E402

GEN_SEED = 20260816
OUT_PATH = ROOT / "fixtures" / "mini_sider.tsv"

# Tokens any template sentence can contain; entity names must avoid all of
# them so a dictionary match never straddles a template boundary.
TEMPLATE_TOKENS = frozenset(
    """
    is an adverse effect of the a drug may cause as or side effects reaction
    reactions causes following listed not yes no known to be associated with
    you are asked answer question single word base your strictly on rag
    results provided below after briefly explain reasoning using information
    from do infer speculate beyond
    """.split()
)

SOC = {
    "nervous": "nervous system disorders",
    "gi": "gastrointestinal disorders",
    "skin": "skin and subcutaneous tissue disorders",
    "psych": "psychiatric disorders",
    "general": "general disorders and administration site conditions",
    "blood": "blood and lymphatic system disorders",
    "msk": "musculoskeletal and connective tissue disorders",
    "cardiac": "cardiac disorders",
    "vascular": "vascular disorders",
    "metabolism": "metabolism and nutrition disorders",
    "eye": "eye disorders",
    "respiratory": "respiratory thoracic and mediastinal disorders",
    "renal": "renal and urinary disorders",
    "hepatic": "hepatobiliary disorders",
    "investigations": "investigations",
    "infections": "infections and infestations",
}

# name -> SOC key, or None for terms left without an organ class.
TERMS: dict[str, str | None] = {
    "headache": "nervous",
    "dizziness": "nervous",
    "somnolence": "nervous",
    "tremor": "nervous",
    "seizure": "nervous",
    "paraesthesia": "nervous",
    "dysgeusia": None,
    "nausea": "gi",
    "vomiting": "gi",
    "diarrhoea": "gi",
    "constipation": "gi",
    "dyspepsia": "gi",
    "peptic ulcer": "gi",
    "ulcer": "gi",
    "abdominal pain": "gi",
    "dry mouth": "gi",
    "flatulence": "gi",
    "rash": "skin",
    "pruritus": "skin",
    "urticaria": "skin",
    "alopecia": "skin",
    "hyperhidrosis": "skin",
    "insomnia": "psych",
    "anxiety": "psych",
    "agitation": "psych",
    "depression": "psych",
    "fatigue": "general",
    "pyrexia": "general",
    "asthenia": "general",
    "oedema peripheral": "general",
    "malaise": "general",
    "night sweats": None,
    "anaemia": "blood",
    "thrombocytopenia": "blood",
    "neutropenia": "blood",
    "leukopenia": "blood",
    "myalgia": "msk",
    "arthralgia": "msk",
    "back pain": "msk",
    "muscle spasms": None,
    "palpitations": "cardiac",
    "tachycardia": "cardiac",
    "bradycardia": "cardiac",
    "hypotension": "vascular",
    "hypertension": "vascular",
    "flushing": None,
    "shock": "vascular",
    "syncope": None,
    "hyperglycaemia": "metabolism",
    "hypoglycaemia": "metabolism",
    "hyponatraemia": "metabolism",
    "hyperkalaemia": "metabolism",
    "appetite decreased": "metabolism",
    "tinnitus": None,
    "vertigo": None,
    "visual impairment": "eye",
    "dyspnoea": "respiratory",
    "cough": "respiratory",
    "bronchospasm": "respiratory",
    "epistaxis": None,
    "haematuria": "renal",
    "proteinuria": None,
    "renal failure": "renal",
    "jaundice": "hepatic",
    "weight increased": "investigations",
    "weight decreased": "investigations",
    "pharyngitis": "infections",
    "rhinitis": "infections",
    "contusion": None,
}

# Deliberately shared by every drug: long, similar per-drug sentences.
COMMON = ("headache", "nausea", "dizziness", "fatigue", "vomiting")

# Eligible drugs (>= 10 side effects): name -> semicolon-joined ATC codes.
DRUGS: dict[str, str] = {
    "aspirin": "B01AC06;N02BA01",
    "metformin": "A10BA02",
    "ibuprofen": "M01AE01",
    "paracetamol": "N02BE01",
    "warfarin": "B01AA03",
    "simvastatin": "C10AA01",
    "atorvastatin": "C10AA05",
    "lisinopril": "C09AA03",
    "enalapril": "C09AA02",
    "amlodipine": "C08CA01",
    "nifedipine": "C08CA05",
    "omeprazole": "A02BC01",
    "pantoprazole": "A02BC02",
    "sertraline": "N06AB06",
    "fluoxetine": "N06AB03",
    "citalopram": "N06AB04",
    "venlafaxine": "N06AX16",
    "gabapentin": "N03AX12",
    "pregabalin": "N03AX16",
    "carbamazepine": "N03AF01",
    "lamotrigine": "N03AX09",
    "levetiracetam": "N03AX14",
    "topiramate": "N03AX11",
    "prednisolone": "H02AB06",
    "dexamethasone": "H02AB02",
    "hydrocortisone": "H02AB09",
    "amoxicillin": "J01CA04",
    "doxycycline": "J01AA02",
    "azithromycin": "J01FA10",
    "ciprofloxacin": "J01MA02",
    "clarithromycin": "J01FA09",
    "furosemide": "C03CA01",
    "spironolactone": "C03DA01",
    "hydrochlorothiazide": "C03AA03",
    "digoxin": "C01AA05",
    "diltiazem": "C08DB01",
    "verapamil": "C08DA01",
    "metoprolol": "C07AB02",
    "atenolol": "C07AB03",
    "propranolol": "C07AA05",
    "bisoprolol": "C07AB07",
    "losartan": "C09CA01",
    "valsartan": "C09CA03",
    "candesartan": "C09CA06",
    "tramadol": "N02AX02",
    "morphine": "N02AA01",
    "codeine": "R05DA04",
    "oxycodone": "N02AA05",
    "naproxen": "M01AE02",
    "diclofenac": "M01AB05",
    "celecoxib": "M01AH01",
    "allopurinol": "M04AA01",
    "methotrexate": "L04AX03",
    "azathioprine": "L04AX01",
    "tacrolimus": "L04AD02",
    "ciclosporin": "L04AD01",
    "levothyroxine": "H03AA01",
    "ondansetron": "A04AA01",
    "metoclopramide": "A03FA01",
    "salbutamol": "R03AC02",
    "montelukast": "R03DC03",
    "cetirizine": "R06AE07",
    "loratadine": "R06AX13",
    "clopidogrel": "B01AC04",
    "rivaroxaban": "B01AF01",
    "insulin glargine": "A10AE04",
    "valproic acid": "N03AG01",
}

# Below the >=10 dataset eligibility bar on purpose (8..9 side effects).
SMALL_DRUGS: dict[str, tuple[str, int]] = {
    "colchicine": ("M04AC01", 8),
    "loperamide": ("A07DA03", 8),
    "domperidone": ("A03FA03", 9),
}

# Forced inclusions beyond the COMMON set.
MUST_HAVE: dict[str, tuple[str, ...]] = {
    "aspirin": ("shock", "peptic ulcer", "contusion", "urticaria", "dyspepsia", "epistaxis"),
    "metformin": ("hypoglycaemia", "diarrhoea", "dysgeusia", "abdominal pain"),
    "naproxen": ("ulcer", "dyspepsia", "abdominal pain"),
    "diclofenac": ("ulcer", "peptic ulcer", "dyspepsia"),
    "warfarin": ("epistaxis", "haematuria", "contusion"),
}

# The drug's list must never contain these (nested-term test relies on it).
MUST_NOT_HAVE: dict[str, tuple[str, ...]] = {
    "aspirin": ("ulcer",),
}

# Rows dropped on ingest: lowest-level-term rows and a drug with no ATC.
DROPPED_ROWS = [
    ("stomach ache", "LLT", "C9000001"),
    ("feeling queasy", "LLT", "C9000002"),
]
NO_ATC_DRUG = ("zelmorin", ("headache", "nausea", "rash"))


def tokens(name: str) -> tuple[str, ...]:
    return tuple(name.split())


def contains(outer: tuple[str, ...], inner: tuple[str, ...]) -> bool:
    if len(inner) > len(outer):
        return False
    return any(
        outer[i : i + len(inner)] == inner
        for i in range(len(outer) - len(inner) + 1)
    )


def validate_names() -> None:
    whitelist = {("ulcer", "peptic ulcer")}
    names = list(TERMS) + list(DRUGS) + list(SMALL_DRUGS)
    for name in names:
        assert name == name.lower().strip(), f"non-canonical name: {name!r}"
        assert "," not in name and "\t" not in name, f"separator in name: {name!r}"
        bad = set(tokens(name)) & TEMPLATE_TOKENS
        assert not bad, f"{name!r} collides with template tokens {bad}"
    for a in names:
        for b in names:
            if a == b:
                continue
            if contains(tokens(b), tokens(a)) and (a, b) not in whitelist:
                raise AssertionError(f"{a!r} nested inside {b!r} (not whitelisted)")


def pick_side_effects(drug: str, n: int) -> list[str]:
    rng = stream_for(GEN_SEED, f"fixture:{drug}")
    chosen = list(COMMON) + [
        se for se in MUST_HAVE.get(drug, ()) if se not in COMMON
    ]
    banned = set(MUST_NOT_HAVE.get(drug, ()))
    pool = sorted(se for se in TERMS if se not in chosen and se not in banned)
    need = max(0, n - len(chosen))
    chosen += rng.sample(pool, need)
    return sorted(chosen)


def main() -> None:
    validate_names()

    term_ids = {name: f"C{i + 1:07d}" for i, name in enumerate(sorted(TERMS))}
    all_drugs = sorted(DRUGS) + sorted(SMALL_DRUGS) + [NO_ATC_DRUG[0]]
    drug_ids = {name: f"CID1{i + 1:08d}" for i, name in enumerate(sorted(all_drugs))}

    rows: list[tuple[str, ...]] = []
    adjacency: dict[str, list[str]] = {}

    def emit(drug: str, atc: str, se: str) -> None:
        soc_key = TERMS.get(se)
        soc = SOC[soc_key] if soc_key else ""
        rows.append((drug_ids[drug], drug, atc, "PT", term_ids[se], se, soc))

    for drug, atc in DRUGS.items():
        rng = stream_for(GEN_SEED, f"count:{drug}")
        count = max(10 + rng.below(21), len(COMMON) + len(MUST_HAVE.get(drug, ())))
        ses = pick_side_effects(drug, count)
        adjacency[drug] = ses
        for se in ses:
            emit(drug, atc, se)

    for drug, (atc, count) in SMALL_DRUGS.items():
        ses = pick_side_effects(drug, count)[:count]
        adjacency[drug] = ses
        for se in ses:
            emit(drug, atc, se)

    for se, term_type, term_id in DROPPED_ROWS:
        rows.append(
            (drug_ids["aspirin"], "aspirin", DRUGS["aspirin"], term_type,
             term_id, se, "")
        )
    for se in NO_ATC_DRUG[1]:
        emit(NO_ATC_DRUG[0], "", se)

    rows.append(rows[0])  # exact duplicate, collapses on ingest
    rows.sort(key=lambda r: (r[1], r[5], r[3]))

    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    header = "drug_id\tdrug_name\tatc_codes\tterm_type\tterm_id\tterm_name\tsoc_class"
    body = "\n".join("\t".join(r) for r in rows)
    OUT_PATH.write_text(header + "\n" + body + "\n", encoding="utf-8")

    kb = load_tsv(OUT_PATH)
    eligible = [d for d, t in kb.adjacency.items() if len(t) >= 10]
    n_assoc = len(kb.associations)
    assert len(kb.drugs) == len(DRUGS) + len(SMALL_DRUGS), len(kb.drugs)
    assert len(eligible) == len(DRUGS), len(eligible)
    expected_assoc = sum(len(v) for v in adjacency.values())
    assert n_assoc == expected_assoc, (n_assoc, expected_assoc)
    for drug, ses in adjacency.items():
        rec = kb.drug_by_name(drug)
        assert rec is not None
        assert list(kb.side_effect_names(rec.drug_id)) == ses, drug
        assert len(kb.terms) - len(ses) >= 10, f"{drug}: negative pool too small"
    aspirin = kb.drug_by_name("aspirin")
    assert aspirin and len(aspirin.atc_codes) == 2
    assert "ulcer" not in kb.side_effect_names(aspirin.drug_id)
    assert "peptic ulcer" in kb.side_effect_names(aspirin.drug_id)

    print(f"wrote {OUT_PATH}")
    print(f"rows written: {len(rows)} (+header)")
    print(f"drugs: {len(kb.drugs)}  terms: {len(kb.terms)}  associations: {n_assoc}")
    print(f"eligible (>=10 side effects): {len(eligible)}")


if __name__ == "__main__":
    main()
