import numpy as np
import pytest

from sceneval.store import (
    ClassTable,
    Conditioning,
    EmbeddingRecord,
    ObjectInstance,
    make_embedding_set,
)


def make_table(names=("cat", "dog", "tree", "sky-other"), things=None, superclass=None):
    n = len(names)
    if things is None:
        things = [True] * n
    if superclass is None:
        superclass = ["misc"] * n
    return ClassTable(
        names=tuple(names), is_thing=tuple(things), superclass=tuple(superclass)
    )


def make_records(
    n,
    kind="real",
    granularity="scene",
    conditioning_ids=None,
    seeds=None,
    object_classes=None,
):
    if conditioning_ids is None:
        conditioning_ids = [f"c{i}" for i in range(n)]
    if seeds is None:
        seeds = [0] * n
    recs = []
    for i in range(n):
        recs.append(
            EmbeddingRecord(
                conditioning_id=conditioning_ids[i],
                seed=seeds[i],
                kind=kind,
                granularity=granularity,
                object_class=None if granularity == "scene" else object_classes[i],
            )
        )
    return recs


def make_set(vectors, **kwargs):
    vectors = np.asarray(vectors, dtype=np.float32)
    return make_embedding_set(vectors, make_records(len(vectors), **kwargs))


def cond(cid, classes, boxes=None):
    classes = list(classes)
    if boxes is None:
        boxes = [(0.1, 0.1, 0.2, 0.2)] * len(classes)
    return Conditioning(
        id=cid,
        instances=tuple(
            ObjectInstance(class_id=c, box=b) for c, b in zip(classes, boxes)
        ),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
