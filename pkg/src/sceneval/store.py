"""On-disk and in-memory data model for embeddings, conditionings and labels.

File formats:

* ``.cseb`` embedding matrix: little-endian header ``magic "CSEB" | u32
  version=1 | u64 N | u32 dim`` followed by N*dim float32 values, row-major.
* ``.meta.jsonl``: one JSON object per matrix row with fields
  ``{conditioning_id, seed, kind, granularity, object_class?}``;
  ``object_class`` is a class *name* resolved against the class table and is
  present exactly for object-granularity rows.
* ``.cond.jsonl``: one conditioning per line,
  ``{id, instances: [{class, box}]}`` with ``box = [x, y, w, h]`` in
  normalized [0, 1] image coordinates. Coarse label sets are always derived
  from the instances, never stored.
* ``classes.json``: ``{names: [...], is_thing: [...], superclass: [...]}``.

All loaded objects are immutable; loading validates every declared invariant
and never returns a partially constructed set.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

MAGIC = b"CSEB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQI")

KINDS = ("real", "generated")
GRANULARITIES = ("scene", "object")


@dataclass(frozen=True)
class ClassTable:
    """Ordered class universe with per-class thing/stuff flag and superclass."""

    names: tuple[str, ...]
    is_thing: tuple[bool, ...]
    superclass: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (len(self.names) == len(self.is_thing) == len(self.superclass)):
            raise ValidationError("class table columns have unequal lengths")
        if any(not n for n in self.names):
            raise ValidationError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("class names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"unknown class name: {name!r}") from None

    def name_of(self, class_id: int) -> str:
        self.check_id(class_id)
        return self.names[class_id]

    def check_id(self, class_id: int) -> None:
        if not (0 <= class_id < len(self.names)):
            raise ValidationError(
                f"class id {class_id} out of range for table of {len(self.names)} classes"
            )

    def things(self) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.is_thing) if t)


@dataclass(frozen=True)
class ObjectInstance:
    """One object in a scene layout: class id plus normalized (x, y, w, h) box."""

    class_id: int
    box: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        x, y, w, h = self.box
        if self.class_id < 0:
            raise ValidationError("class id must be non-negative")
        if w <= 0 or h <= 0:
            raise ValidationError(f"box must have positive extent, got w={w}, h={h}")
        if x < 0 or y < 0 or x + w > 1 + 1e-9 or y + h > 1 + 1e-9:
            raise ValidationError(f"box {self.box} escapes the unit square")


@dataclass(frozen=True)
class Conditioning:
    """A finegrained scene layout; ``coarse`` is the derived class-label set."""

    id: str
    instances: tuple[ObjectInstance, ...]
    coarse: frozenset[int] = field(init=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("conditioning id must be non-empty")
        if not self.instances:
            raise ValidationError(f"conditioning {self.id!r} has no instances")
        object.__setattr__(
            self, "coarse", frozenset(inst.class_id for inst in self.instances)
        )


@dataclass(frozen=True)
class EmbeddingRecord:
    """Per-row metadata; ``object_class`` present exactly for object rows."""

    conditioning_id: str
    seed: int
    kind: str
    granularity: str
    object_class: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.granularity not in GRANULARITIES:
            raise ValidationError(
                f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}"
            )
        if (self.object_class is None) == (self.granularity == "object"):
            raise ValidationError(
                "object_class must be present exactly for object-granularity rows"
            )
        if self.kind == "real" and self.seed != 0:
            raise ValidationError("real rows must have seed 0")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """A float32 (N, dim) matrix with one aligned EmbeddingRecord per row."""

    dim: int
    vectors: np.ndarray
    records: tuple[EmbeddingRecord, ...]

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValidationError("dim must be positive")
        v = self.vectors
        if v.dtype != np.float32 or v.ndim != 2 or v.shape[1] != self.dim:
            raise ValidationError(
                f"vectors must be a float32 (N, {self.dim}) matrix, got "
                f"{v.dtype} {v.shape}"
            )
        if v.shape[0] != len(self.records):
            raise ValidationError(
                f"row count {v.shape[0]} does not match {len(self.records)} records"
            )
        if v.size and not np.isfinite(v).all():
            raise ValidationError("embedding matrix contains non-finite values")
        v.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.records)

    def __len__(self) -> int:
        return len(self.records)


def make_embedding_set(
    vectors: np.ndarray, records: Sequence[EmbeddingRecord]
) -> EmbeddingSet:
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValidationError("vectors must be 2-D")
    return EmbeddingSet(dim=vectors.shape[1], vectors=vectors, records=tuple(records))


# ---------------------------------------------------------------------------
# classes.json


def load_class_table(path) -> ClassTable:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    for key in ("names", "is_thing", "superclass"):
        if key not in raw:
            raise ValidationError(f"class table file missing key {key!r}")
    return ClassTable(
        names=tuple(raw["names"]),
        is_thing=tuple(bool(b) for b in raw["is_thing"]),
        superclass=tuple(raw["superclass"]),
    )


def save_class_table(table: ClassTable, path) -> None:
    payload = {
        "names": list(table.names),
        "is_thing": list(table.is_thing),
        "superclass": list(table.superclass),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# .cseb matrix + .meta.jsonl


def _record_to_json(rec: EmbeddingRecord, table: ClassTable) -> dict:
    obj = {
        "conditioning_id": rec.conditioning_id,
        "seed": rec.seed,
        "kind": rec.kind,
        "granularity": rec.granularity,
    }
    if rec.object_class is not None:
        obj["object_class"] = table.name_of(rec.object_class)
    return obj


def _record_from_json(obj: dict, table: ClassTable, line_no: int) -> EmbeddingRecord:
    try:
        object_class = None
        if "object_class" in obj:
            object_class = table.id_of(obj["object_class"])
        return EmbeddingRecord(
            conditioning_id=obj["conditioning_id"],
            seed=int(obj["seed"]),
            kind=obj["kind"],
            granularity=obj["granularity"],
            object_class=object_class,
        )
    except KeyError as e:
        raise ValidationError(f"metadata line {line_no}: missing field {e}") from None


def load_embedding_set(matrix_path, metadata_path, class_table: ClassTable) -> EmbeddingSet:
    """Load and validate a .cseb matrix plus its aligned metadata lines."""
    with open(matrix_path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ValidationError(f"{matrix_path}: truncated header")
        magic, version, n, dim = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValidationError(f"{matrix_path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValidationError(f"{matrix_path}: unsupported format version {version}")
        if dim == 0:
            raise ValidationError(f"{matrix_path}: dim must be positive")
        payload = f.read()
    expected = n * dim * 4
    if len(payload) != expected:
        raise ValidationError(
            f"{matrix_path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float32)

    records = []
    with open(metadata_path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{metadata_path}:{line_no}: {e}") from None
            records.append(_record_from_json(obj, class_table, line_no))
    if len(records) != n:
        raise ValidationError(
            f"matrix declares {n} rows but metadata has {len(records)} lines"
        )
    return EmbeddingSet(dim=int(dim), vectors=vectors, records=tuple(records))


def save_embedding_set(
    eset: EmbeddingSet, matrix_path, metadata_path, class_table: ClassTable
) -> None:
    with open(matrix_path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, eset.n, eset.dim))
        f.write(np.ascontiguousarray(eset.vectors, dtype="<f4").tobytes())
    with open(metadata_path, "w", encoding="utf-8") as f:
        for rec in eset.records:
            f.write(json.dumps(_record_to_json(rec, class_table), sort_keys=True))
            f.write("\n")


def filter_set(
    eset: EmbeddingSet, predicate: Callable[[EmbeddingRecord], bool]
) -> EmbeddingSet:
    """Keep rows whose record satisfies the predicate, preserving order."""
    keep = [i for i, rec in enumerate(eset.records) if predicate(rec)]
    vectors = np.ascontiguousarray(eset.vectors[keep], dtype=np.float32)
    vectors = vectors.reshape(len(keep), eset.dim)
    return EmbeddingSet(
        dim=eset.dim,
        vectors=vectors,
        records=tuple(eset.records[i] for i in keep),
    )


def concat_sets(sets: Sequence[EmbeddingSet]) -> EmbeddingSet:
    """Stack several sets into one; records are shared, not copied."""
    if not sets:
        raise ValidationError("cannot concatenate zero sets")
    dim = sets[0].dim
    for s in sets[1:]:
        if s.dim != dim:
            raise ValidationError("cannot concatenate sets of different dim")
    vectors = np.concatenate([s.vectors for s in sets], axis=0)
    records = tuple(rec for s in sets for rec in s.records)
    return EmbeddingSet(dim=dim, vectors=np.ascontiguousarray(vectors), records=records)


# ---------------------------------------------------------------------------
# .cond.jsonl


def load_conditionings(path, class_table: ClassTable) -> list[Conditioning]:
    conds: list[Conditioning] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}:{line_no}: {e}") from None
            try:
                cid = obj["id"]
                instances = tuple(
                    ObjectInstance(
                        class_id=class_table.id_of(inst["class"]),
                        box=tuple(float(v) for v in inst["box"]),
                    )
                    for inst in obj["instances"]
                )
            except KeyError as e:
                raise ValidationError(f"{path}:{line_no}: missing field {e}") from None
            if cid in seen_ids:
                raise ValidationError(f"{path}:{line_no}: duplicate conditioning id {cid!r}")
            seen_ids.add(cid)
            conds.append(Conditioning(id=cid, instances=instances))
    return conds


def save_conditionings(conds: Iterable[Conditioning], path, class_table: ClassTable) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cond in conds:
            obj = {
                "id": cond.id,
                "instances": [
                    {"class": class_table.name_of(inst.class_id), "box": list(inst.box)}
                    for inst in cond.instances
                ],
            }
            f.write(json.dumps(obj, sort_keys=True))
            f.write("\n")


def conditioning_index(conds: Iterable[Conditioning]) -> dict[str, Conditioning]:
    index: dict[str, Conditioning] = {}
    for cond in conds:
        if cond.id in index:
            raise ValidationError(f"duplicate conditioning id {cond.id!r}")
        index[cond.id] = cond
    return index


def resolve_conditioning(conds: Mapping[str, Conditioning], cid: str) -> Conditioning:
    try:
        return conds[cid]
    except KeyError:
        raise ValidationError(f"unresolvable conditioning id {cid!r}") from None
