"""Walkthrough: the on-disk data model.

Creates a tiny class table, a few conditionings, and an embedding set, writes
them in the toolkit's formats (.cseb matrix, .meta.jsonl, .cond.jsonl,
classes.json) and loads everything back.
"""

import tempfile
from pathlib import Path

import numpy as np

from sceneval import (
    ClassTable,
    Conditioning,
    EmbeddingRecord,
    ObjectInstance,
    filter_set,
    load_class_table,
    load_conditionings,
    load_embedding_set,
    make_embedding_set,
    save_class_table,
    save_conditionings,
    save_embedding_set,
)

root = Path(tempfile.mkdtemp(prefix="sceneval_demo_"))
print(f"writing demo files under {root}\n")

# a class universe: two countable things and one stuff class
table = ClassTable(
    names=("cat", "dog", "grass"),
    is_thing=(True, True, False),
    superclass=("animal", "animal", "ground"),
)
save_class_table(table, root / "classes.json")
print("classes:", load_class_table(root / "classes.json").names)

# two scene layouts; the coarse label set is always derived, never stored
conds = [
    Conditioning(
        id="scene-a",
        instances=(
            ObjectInstance(class_id=0, box=(0.1, 0.2, 0.3, 0.4)),
            ObjectInstance(class_id=0, box=(0.5, 0.2, 0.3, 0.4)),
            ObjectInstance(class_id=2, box=(0.0, 0.6, 1.0, 0.4)),
        ),
    ),
    Conditioning(id="scene-b", instances=(ObjectInstance(1, (0.2, 0.2, 0.5, 0.5)),)),
]
save_conditionings(conds, root / "demo.cond.jsonl", table)
for c in load_conditionings(root / "demo.cond.jsonl", table):
    print(f"conditioning {c.id}: {len(c.instances)} instances, "
          f"coarse set {sorted(table.name_of(i) for i in c.coarse)}")

# a 4-row embedding set: 2 real scenes + the same scenes from one generation seed
rng = np.random.default_rng(0)
vectors = rng.standard_normal((4, 8)).astype(np.float32)
records = [
    EmbeddingRecord("scene-a", 0, "real", "scene"),
    EmbeddingRecord("scene-b", 0, "real", "scene"),
    EmbeddingRecord("scene-a", 1, "generated", "scene"),
    EmbeddingRecord("scene-b", 1, "generated", "scene"),
]
eset = make_embedding_set(vectors, records)
save_embedding_set(eset, root / "demo.cseb", root / "demo.meta.jsonl", table)

back = load_embedding_set(root / "demo.cseb", root / "demo.meta.jsonl", table)
print(f"\nround-trip: N={back.n}, dim={back.dim}, "
      f"bit-exact={np.array_equal(back.vectors, eset.vectors)}")

generated_only = filter_set(back, lambda r: r.kind == "generated")
print(f"filter kind=generated keeps {generated_only.n} of {back.n} rows")
