"""Walkthrough: the diversity score and the label-set metrics.

DS is the mean pairwise distance among samples generated from the same
conditioning across seeds (perceptual table when available, embedding
distance otherwise). Scene predictions score per-image set F1 against coarse
conditionings; object predictions score classification accuracy.
"""

import numpy as np

from sceneval import ds_from_embeddings, ds_from_table, mean_f1, object_accuracy
from sceneval.diversity import PairwiseDistanceTable
from sceneval.labelmetrics import ObjectPrediction, ScenePrediction
from sceneval.store import Conditioning, EmbeddingRecord, ObjectInstance, make_embedding_set

# --- diversity from a precomputed (e.g. perceptual) distance table ---------
table = PairwiseDistanceTable(
    {
        ("layout-1", 1, 2): 0.21,
        ("layout-1", 1, 3): 0.35,
        ("layout-1", 2, 3): 0.28,
        ("layout-2", 1, 2): 0.55,
        ("layout-2", 1, 3): 0.61,
        ("layout-2", 2, 3): 0.47,
    }
)
mean, std = ds_from_table(table)
print(f"DS from table: {mean:.3f} +/- {std:.3f} (std across conditionings)")

# --- fallback: embedding-space distances ------------------------------------
rng = np.random.default_rng(5)
rows, recs = [], []
for cid, spread in (("layout-1", 0.1), ("layout-2", 2.0)):
    center = rng.standard_normal(8)
    for seed in (1, 2, 3):
        rows.append(center + spread * rng.standard_normal(8))
        recs.append(EmbeddingRecord(cid, seed, "generated", "scene"))
eset = make_embedding_set(np.array(rows, dtype=np.float32), recs)
mean, std = ds_from_embeddings(eset)
print(f"DS from embeddings: {mean:.3f} +/- {std:.3f} (flagged ds_mode=embedding)")

# --- scene F1 ----------------------------------------------------------------
conds = {
    "layout-1": Conditioning("layout-1", (ObjectInstance(0, (0.1, 0.1, 0.4, 0.4)),
                                          ObjectInstance(1, (0.5, 0.5, 0.4, 0.4)))),
    "layout-2": Conditioning("layout-2", (ObjectInstance(2, (0.2, 0.2, 0.6, 0.6)),)),
}
preds = [
    ScenePrediction("layout-1", 1, frozenset({0, 1})),  # exact -> 1
    ScenePrediction("layout-2", 1, frozenset({0, 2})),  # one spurious -> 2/3
]
print(f"\nmean scene F1: {mean_f1(preds, conds):.3f}")

# --- object accuracy ---------------------------------------------------------
obj_preds = [
    ObjectPrediction("layout-1", 1, 0, 0),  # cat crop classified cat
    ObjectPrediction("layout-1", 1, 1, 0),  # dog crop classified cat
    ObjectPrediction("layout-2", 1, 0, 2),  # correct
]
print(f"object accuracy: {object_accuracy(obj_preds, conds):.3f}")
