"""Readers and writers for the evaluation toolkit's wire formats.

Implemented against the published byte layouts, deliberately standalone so
the adapter shares no code with the consumer:

* ``.cseb``: little-endian header (magic "CSEB", u32 version=1, u64 N,
  u32 dim) followed by N*dim float32, row-major.
* ``.meta.jsonl``: {conditioning_id, seed, kind, granularity, object_class?}
  per row, object_class only for object-granularity rows.
* ``classes.json``: {names, is_thing, superclass} parallel lists.
* ``.cond.jsonl``: {id, instances: [{class, box}]} per conditioning.

All file writes are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CSEB"
HEADER = struct.Struct("<4sIQI")


class ExtractError(Exception):
    pass


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def write_matrix(path, vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ExtractError("embedding matrix must be 2-D")
    n, dim = vectors.shape
    payload = HEADER.pack(MAGIC, 1, n, dim) + vectors.tobytes()
    _atomic_write_bytes(Path(path), payload)


def write_meta(path, rows: list[dict]) -> None:
    lines = [json.dumps(row, sort_keys=True) for row in rows]
    atomic_write_text(Path(path), "".join(line + "\n" for line in lines))


def write_jsonl(path, rows: list[dict]) -> None:
    write_meta(path, rows)


@dataclass(frozen=True)
class ClassTable:
    names: tuple[str, ...]
    is_thing: tuple[bool, ...]

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ExtractError(f"unknown class name {name!r}") from None


def load_class_table(path) -> ClassTable:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    return ClassTable(names=tuple(raw["names"]), is_thing=tuple(bool(b) for b in raw["is_thing"]))


@dataclass(frozen=True)
class Instance:
    class_name: str
    box: tuple[float, float, float, float]  # normalized x, y, w, h


@dataclass(frozen=True)
class LayoutConditioning:
    id: str
    instances: tuple[Instance, ...]


def load_conditionings(path) -> dict[str, LayoutConditioning]:
    conds: dict[str, LayoutConditioning] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                cid = obj["id"]
                instances = tuple(
                    Instance(class_name=i["class"], box=tuple(float(v) for v in i["box"]))
                    for i in obj["instances"]
                )
            except (json.JSONDecodeError, KeyError) as e:
                raise ExtractError(f"{path}:{line_no}: {e}") from None
            if cid in conds:
                raise ExtractError(f"{path}:{line_no}: duplicate conditioning {cid!r}")
            conds[cid] = LayoutConditioning(id=cid, instances=instances)
    return conds
