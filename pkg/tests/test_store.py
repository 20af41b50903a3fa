import json
import struct

import numpy as np
import pytest

from sceneval.errors import ValidationError
from sceneval.store import (
    Conditioning,
    EmbeddingRecord,
    EmbeddingSet,
    ObjectInstance,
    conditioning_index,
    filter_set,
    load_conditionings,
    load_embedding_set,
    make_embedding_set,
    save_conditionings,
    save_embedding_set,
)

from conftest import make_records, make_set, make_table


def roundtrip(eset, table, tmp_path):
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    save_embedding_set(eset, mpath, dpath, table)
    return load_embedding_set(mpath, dpath, table)


def test_roundtrip_identity(tmp_path, rng):
    table = make_table()
    eset = make_set(rng.standard_normal((7, 5)))
    back = roundtrip(eset, table, tmp_path)
    assert back.dim == 5 and back.n == 7
    assert np.array_equal(back.vectors, eset.vectors)
    assert back.records == eset.records


def test_roundtrip_object_rows_and_seeds(tmp_path, rng):
    table = make_table()
    recs = make_records(
        4,
        kind="generated",
        granularity="object",
        seeds=[1, 2, 3, 4],
        object_classes=[0, 1, 2, 3],
    )
    eset = make_embedding_set(rng.standard_normal((4, 3)).astype(np.float32), recs)
    back = roundtrip(eset, table, tmp_path)
    assert back.records == eset.records


def test_empty_set_roundtrips(tmp_path):
    table = make_table()
    eset = EmbeddingSet(dim=4, vectors=np.zeros((0, 4), dtype=np.float32), records=())
    back = roundtrip(eset, table, tmp_path)
    assert back.n == 0 and back.dim == 4


def test_row_count_mismatch(tmp_path, rng):
    table = make_table()
    eset = make_set(rng.standard_normal((3, 4)))
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    save_embedding_set(eset, mpath, dpath, table)
    lines = dpath.read_text().splitlines()
    dpath.write_text("\n".join(lines[:2]) + "\n")
    with pytest.raises(ValidationError, match="metadata has 2"):
        load_embedding_set(mpath, dpath, table)


def test_truncated_matrix_rejected(tmp_path, rng):
    table = make_table()
    eset = make_set(rng.standard_normal((3, 4)))
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    save_embedding_set(eset, mpath, dpath, table)
    data = mpath.read_bytes()
    mpath.write_bytes(data[:-5])
    with pytest.raises(ValidationError, match="payload"):
        load_embedding_set(mpath, dpath, table)


def test_bad_magic_rejected(tmp_path, rng):
    table = make_table()
    eset = make_set(rng.standard_normal((2, 2)))
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    save_embedding_set(eset, mpath, dpath, table)
    data = bytearray(mpath.read_bytes())
    data[:4] = b"XXXX"
    mpath.write_bytes(bytes(data))
    with pytest.raises(ValidationError, match="magic"):
        load_embedding_set(mpath, dpath, table)


def test_nan_rejected(tmp_path):
    table = make_table()
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    vals = np.array([[1.0, np.nan]], dtype="<f4")
    with open(mpath, "wb") as f:
        f.write(struct.pack("<4sIQI", b"CSEB", 1, 1, 2))
        f.write(vals.tobytes())
    dpath.write_text(
        json.dumps(
            {"conditioning_id": "c0", "seed": 0, "kind": "real", "granularity": "scene"}
        )
        + "\n"
    )
    with pytest.raises(ValidationError, match="non-finite"):
        load_embedding_set(mpath, dpath, table)


def test_unknown_class_name_rejected(tmp_path):
    table = make_table()
    mpath, dpath = tmp_path / "a.cseb", tmp_path / "a.meta.jsonl"
    with open(mpath, "wb") as f:
        f.write(struct.pack("<4sIQI", b"CSEB", 1, 1, 2))
        f.write(np.zeros((1, 2), dtype="<f4").tobytes())
    dpath.write_text(
        json.dumps(
            {
                "conditioning_id": "c0",
                "seed": 0,
                "kind": "real",
                "granularity": "object",
                "object_class": "unicorn",
            }
        )
        + "\n"
    )
    with pytest.raises(ValidationError, match="unknown class"):
        load_embedding_set(mpath, dpath, table)


def test_record_invariants():
    with pytest.raises(ValidationError):
        EmbeddingRecord("c", 0, "real", "object", object_class=None)
    with pytest.raises(ValidationError):
        EmbeddingRecord("c", 0, "real", "scene", object_class=1)
    with pytest.raises(ValidationError):
        EmbeddingRecord("c", 3, "real", "scene")  # real rows carry seed 0
    EmbeddingRecord("c", 3, "generated", "scene")


def test_filter_counts(rng):
    recs = make_records(2, kind="real") + make_records(
        3, kind="generated", seeds=[1, 1, 2], conditioning_ids=["g0", "g1", "g2"]
    )
    eset = make_embedding_set(rng.standard_normal((5, 3)).astype(np.float32), recs)
    gen = filter_set(eset, lambda r: r.kind == "generated")
    assert gen.n == 3 and gen.dim == 3
    assert filter_set(eset, lambda r: True).n == 5
    assert filter_set(eset, lambda r: False).n == 0


def test_filter_composes(rng):
    recs = make_records(6, kind="generated", seeds=[1, 2, 1, 2, 1, 2])
    eset = make_embedding_set(rng.standard_normal((6, 2)).astype(np.float32), recs)
    p = lambda r: r.seed == 1
    q = lambda r: r.conditioning_id in {"c0", "c2", "c3"}
    both = filter_set(eset, lambda r: p(r) and q(r))
    chained = filter_set(filter_set(eset, p), q)
    assert np.array_equal(both.vectors, chained.vectors)
    assert both.records == chained.records


def test_conditioning_coarse_derivation():
    c = Conditioning(
        id="x",
        instances=(
            ObjectInstance(0, (0.1, 0.1, 0.3, 0.3)),
            ObjectInstance(0, (0.5, 0.5, 0.3, 0.3)),
            ObjectInstance(2, (0.2, 0.6, 0.2, 0.2)),
        ),
    )
    assert c.coarse == frozenset({0, 2})


def test_conditioning_requires_instances():
    with pytest.raises(ValidationError):
        Conditioning(id="x", instances=())


def test_box_invariants():
    with pytest.raises(ValidationError):
        ObjectInstance(0, (0.9, 0.1, 0.3, 0.2))  # x + w > 1
    with pytest.raises(ValidationError):
        ObjectInstance(0, (0.1, 0.1, 0.0, 0.2))  # zero width


def test_conditionings_roundtrip(tmp_path):
    table = make_table()
    conds = [
        Conditioning(
            id="a",
            instances=(
                ObjectInstance(0, (0.0, 0.0, 0.5, 0.5)),
                ObjectInstance(1, (0.5, 0.5, 0.5, 0.5)),
            ),
        ),
        Conditioning(id="b", instances=(ObjectInstance(2, (0.25, 0.25, 0.5, 0.5)),)),
    ]
    path = tmp_path / "c.cond.jsonl"
    save_conditionings(conds, path, table)
    back = load_conditionings(path, table)
    assert [c.id for c in back] == ["a", "b"]
    assert back[0].coarse == frozenset({0, 1})
    idx = conditioning_index(back)
    assert idx["b"].instances[0].class_id == 2


def test_duplicate_conditioning_id_rejected(tmp_path):
    table = make_table()
    line = json.dumps({"id": "a", "instances": [{"class": "cat", "box": [0, 0, 1, 1]}]})
    path = tmp_path / "c.cond.jsonl"
    path.write_text(line + "\n" + line + "\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_conditionings(path, table)
