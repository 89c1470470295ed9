"""One-off probe: top-5 retrieval recall for both corpus formats on the fixture.

Not part of the test suite; used to pick honest thresholds.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from pvrag.backends import HashingEmbedder
from pvrag.index import build_index, search
from pvrag.kb import export_corpus, load_tsv
from pvrag.pipeline import filter_check_format_a, filter_check_format_b
from pvrag.entities import extract_entities
from pvrag.prompts import build_question

kb = load_tsv(pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "mini_sider.tsv")
provider = HashingEmbedder()
idx = {}
for fmt in ("A", "B"):
    idx[fmt] = build_index(export_corpus(kb, fmt), provider)
    print(f"format {fmt}: {len(idx[fmt])} chunks")

miss = {"A": [], "B": []}
total = 0
for drug_id, term_ids in sorted(kb.adjacency.items(), key=lambda kv: kv[0]):
    drug = kb.drugs[drug_id]
    for term_id in term_ids:
        term = kb.terms[term_id]
        q = build_question(term.name, drug.name)
        ents = extract_entities(q, kb)
        total += 1
        hits_a = search(idx["A"], provider, q, 5)
        if not filter_check_format_a(hits_a, ents).associated:
            miss["A"].append((drug.name, term.name))
        hits_b = search(idx["B"], provider, q, 5)
        if not filter_check_format_b(hits_b, ents).associated:
            miss["B"].append((drug.name, term.name))

for fmt in ("A", "B"):
    recall = 1.0 - len(miss[fmt]) / total
    print(f"format {fmt}: recall {recall:.4f}  misses {len(miss[fmt])}/{total}")
    for m in miss[fmt][:15]:
        print("   miss:", m)
