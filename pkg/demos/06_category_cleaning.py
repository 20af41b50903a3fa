"""Walkthrough: confusion-driven category cleaning.

Object crops whose nearest neighbor belongs to another class reveal
confusable categories. The proposal step surfaces merge candidates above the
diagonal probability, filtered by the documented rules; a hand-authored
merge map then relabels records and conditionings.
"""

import numpy as np

from sceneval import (
    ClassTable,
    RuleConfig,
    apply_merge_map_records,
    one_nn_confusion,
    propose_merges,
)
from sceneval.store import EmbeddingRecord, make_embedding_set

table = ClassTable(
    names=("couch", "sofa", "person", "furniture-other"),
    is_thing=(True, True, True, False),
    superclass=("furniture", "furniture", "human", "furniture"),
)

# couch and sofa crops interleave in feature space; person sits apart
rng = np.random.default_rng(11)
rows, classes = [], []
for i in range(30):
    cls = i % 2  # couch / sofa
    rows.append(rng.standard_normal(5) * 0.5)
    classes.append(cls)
for i in range(10):
    rows.append(rng.standard_normal(5) * 0.5 + 20.0)
    classes.append(2)
crops = make_embedding_set(
    np.array(rows, dtype=np.float32),
    [
        EmbeddingRecord(f"img{i}", 0, "real", "object", object_class=c)
        for i, c in enumerate(classes)
    ],
)

cm = one_nn_confusion(crops, n_classes=len(table))
print("row-normalized confusion (rows = true class):")
for name, row, support in zip(table.names, cm.matrix, cm.support):
    print(f"  {name:16s} {np.round(row, 2)}  (support {support})")

proposals = propose_merges(cm, RuleConfig(), table)
print("\nmerge proposals:")
for p in proposals:
    cands = ", ".join(f"{table.name_of(c)} ({prob:.2f})" for c, prob in p.candidates)
    print(f"  {table.name_of(p.target):16s} -> [{cands}] dropped: {list(p.rule_trace)}")

# a human confirms couch <- sofa; the map is applied mechanically
merged = apply_merge_map_records(crops, {table.id_of("sofa"): table.id_of("couch")})
before = sum(r.object_class == table.id_of("sofa") for r in crops.records)
after = sum(r.object_class == table.id_of("sofa") for r in merged.records)
print(f"\nafter applying sofa->couch: sofa rows {before} -> {after}")
