"""Builders for complete on-disk panel scenarios used across test modules."""

import json

import numpy as np

from sceneval.store import (
    ClassTable,
    Conditioning,
    EmbeddingRecord,
    ObjectInstance,
    make_embedding_set,
    save_class_table,
    save_conditionings,
    save_embedding_set,
)
from sceneval.splits import SplitAssignment, save_split_assignment

TABLE = ClassTable(
    names=("cat", "dog", "tree"),
    is_thing=(True, True, False),
    superclass=("animal", "animal", "plant"),
)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def build_panel_fixture(
    root,
    rng,
    n_per_split=4,
    seeds=(1, 2),
    dim=4,
    gen_offset=0.0,
    splits=("seen", "unseen_fg", "unseen_coarse"),
    jitter=0.0,
    k=2,
):
    """Write a full panel input tree under root and return the config path.

    Every conditioning gets one real scene row at its own cluster center and
    one generated scene row per seed at center + gen_offset (+ jitter).
    Object rows mirror this per thing-instance. Predictions are perfect.
    """
    root.mkdir(parents=True, exist_ok=True)
    class_path = root / "classes.json"
    save_class_table(TABLE, class_path)

    coarse_by_split = {
        "seen": [(0,), (0, 1)],
        "unseen_fg": [(0,), (0, 1)],
        "unseen_coarse": [(1, 2), (0, 2)],
    }
    conds, assignment = [], {}
    for split in splits:
        for i in range(n_per_split):
            classes = coarse_by_split[split][i % len(coarse_by_split[split])]
            boxes = [(0.1 + 0.2 * j, 0.1, 0.15, 0.3) for j in range(len(classes))]
            cid = f"{split}_{i}"
            conds.append(
                Conditioning(
                    id=cid,
                    instances=tuple(
                        ObjectInstance(class_id=c, box=b) for c, b in zip(classes, boxes)
                    ),
                )
            )
            assignment[cid] = split
    cond_path = root / "conds.cond.jsonl"
    save_conditionings(conds, cond_path, TABLE)
    split_path = root / "split.json"
    save_split_assignment(SplitAssignment(assignment), split_path)

    centers = {c.id: rng.standard_normal(dim) * 10 for c in conds}

    def jit():
        return rng.standard_normal(dim) * jitter if jitter else 0.0

    scene_real_vecs, scene_real_recs = [], []
    scene_gen_vecs, scene_gen_recs = [], []
    obj_real_vecs, obj_real_recs = [], []
    obj_gen_vecs, obj_gen_recs = [], []
    scene_preds, obj_preds = [], []
    for c in conds:
        scene_real_vecs.append(centers[c.id])
        scene_real_recs.append(
            EmbeddingRecord(conditioning_id=c.id, seed=0, kind="real", granularity="scene")
        )
        for s in seeds:
            scene_gen_vecs.append(centers[c.id] + gen_offset + jit())
            scene_gen_recs.append(
                EmbeddingRecord(
                    conditioning_id=c.id, seed=s, kind="generated", granularity="scene"
                )
            )
            scene_preds.append(
                {
                    "conditioning_id": c.id,
                    "seed": s,
                    "labels": sorted(TABLE.name_of(cls) for cls in c.coarse),
                }
            )
        for idx, inst in enumerate(c.instances):
            if not TABLE.is_thing[inst.class_id]:
                continue
            center = centers[c.id] + (idx + 1) * 100.0
            obj_real_vecs.append(center)
            obj_real_recs.append(
                EmbeddingRecord(
                    conditioning_id=c.id,
                    seed=0,
                    kind="real",
                    granularity="object",
                    object_class=inst.class_id,
                )
            )
            for s in seeds:
                obj_gen_vecs.append(center + gen_offset + jit())
                obj_gen_recs.append(
                    EmbeddingRecord(
                        conditioning_id=c.id,
                        seed=s,
                        kind="generated",
                        granularity="object",
                        object_class=inst.class_id,
                    )
                )
                obj_preds.append(
                    {
                        "conditioning_id": c.id,
                        "seed": s,
                        "instance_index": idx,
                        "label": TABLE.name_of(inst.class_id),
                    }
                )

    paths = {}
    for name, vecs, recs in (
        ("scene_real", scene_real_vecs, scene_real_recs),
        ("scene_gen", scene_gen_vecs, scene_gen_recs),
        ("obj_real", obj_real_vecs, obj_real_recs),
        ("obj_gen", obj_gen_vecs, obj_gen_recs),
    ):
        eset = make_embedding_set(np.array(vecs, dtype=np.float32), recs)
        mp, dp = root / f"{name}.cseb", root / f"{name}.meta.jsonl"
        save_embedding_set(eset, mp, dp, TABLE)
        paths[name] = (mp.name, dp.name)

    _write_jsonl(root / "scene_preds.jsonl", scene_preds)
    _write_jsonl(root / "obj_preds.jsonl", obj_preds)

    config = {
        "class_table": class_path.name,
        "conditionings": cond_path.name,
        "split_file": split_path.name,
        "k": k,
        "embedding_source": "synthetic-fixture",
        "splits": list(splits),
        "scene": {
            "real": {"matrix": paths["scene_real"][0], "meta": paths["scene_real"][1]},
            "generated": {"matrix": paths["scene_gen"][0], "meta": paths["scene_gen"][1]},
        },
        "object": {
            "real": {"matrix": paths["obj_real"][0], "meta": paths["obj_real"][1]},
            "generated": {"matrix": paths["obj_gen"][0], "meta": paths["obj_gen"][1]},
        },
        "predictions": {"scene": "scene_preds.jsonl", "object": "obj_preds.jsonl"},
    }
    config_path = root / "panel_config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return config_path
