"""Category-cleaning support: 1-NN confusion over object-crop embeddings and
rule-driven merge-candidate proposal.

Each crop is classified as the class of its nearest other crop; the resulting
confusion matrix (rows = true class, row-normalized) feeds a proposal step
that surfaces, per target class, up to five confused classes at least as
probable as the target's own diagonal, filtered by configurable rules
(globally excluded classes, excluded target/candidate pairs, and a guard
against merging '-other' catch-all stuff classes unless their whole
superclass is merged together). Final merge decisions stay with a human; the
toolkit applies a hand-authored merge map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .manifold import pairwise_distances
from .store import (
    ClassTable,
    Conditioning,
    EmbeddingRecord,
    EmbeddingSet,
    ObjectInstance,
)

RULE_EXCLUDED_CLASS = "excluded-class"
RULE_EXCLUDED_PAIR = "excluded-pair"
RULE_OTHER_SUFFIX = "other-suffix"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-normalized class confusion; rows with zero support are all-zero."""

    matrix: np.ndarray  # (C, C) float64
    support: np.ndarray  # (C,) int64

    def __post_init__(self) -> None:
        c = self.matrix.shape[0]
        if self.matrix.shape != (c, c) or self.support.shape != (c,):
            raise ValidationError("confusion matrix shapes are inconsistent")
        for i in range(c):
            row_sum = float(self.matrix[i].sum())
            if self.support[i] > 0:
                if abs(row_sum - 1.0) > 1e-9:
                    raise ValidationError(f"row {i} sums to {row_sum}, expected 1")
            elif row_sum != 0.0:
                raise ValidationError(f"zero-support row {i} is not all-zero")
        self.matrix.setflags(write=False)
        self.support.setflags(write=False)

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class MergeProposal:
    target: int
    candidates: tuple[tuple[int, float], ...]  # (class, confusion prob), prob desc
    rule_trace: tuple[str, ...]  # "<rule>:<dropped class name>" per drop

    def __post_init__(self) -> None:
        probs = [p for _, p in self.candidates]
        if probs != sorted(probs, reverse=True):
            raise ValidationError("candidates must be sorted by probability descending")
        if len(self.candidates) > 5:
            raise ValidationError("at most 5 merge candidates per target")


@dataclass(frozen=True)
class RuleConfig:
    exclude_classes: tuple[str, ...] = ("person",)
    exclude_pairs: tuple[tuple[str, str], ...] = ()
    other_suffix: str = "-other"

    @staticmethod
    def from_json(path) -> "RuleConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        return RuleConfig(
            exclude_classes=tuple(raw.get("exclude_classes", ["person"])),
            exclude_pairs=tuple(tuple(p) for p in raw.get("exclude_pairs", [])),
            other_suffix=raw.get("other_suffix", "-other"),
        )


def one_nn_confusion(crops: EmbeddingSet, n_classes: int | None = None) -> ConfusionMatrix:
    """Row-normalized confusion matrix from nearest-other-crop prediction.

    The predicted class of each crop is the class of its nearest other crop
    (self excluded, exact distance ties going to the lowest row index).
    """
    if crops.n < 2:
        raise ValidationError("1-NN confusion needs at least 2 crops")
    classes = []
    for rec in crops.records:
        if rec.granularity != "object" or rec.object_class is None:
            raise ValidationError("1-NN confusion needs object-granularity rows")
        classes.append(rec.object_class)
    classes = np.array(classes, dtype=np.intp)
    if n_classes is None:
        n_classes = int(classes.max()) + 1
    elif int(classes.max()) >= n_classes:
        raise ValidationError("object class id exceeds the declared class count")

    dists = pairwise_distances(crops.vectors, crops.vectors)
    np.fill_diagonal(dists, np.inf)
    nearest = np.argmin(dists, axis=1)  # first (lowest-index) minimum on ties
    predicted = classes[nearest]

    counts = np.zeros((n_classes, n_classes), dtype=np.float64)
    np.add.at(counts, (classes, predicted), 1.0)
    support = counts.sum(axis=1).astype(np.int64)
    matrix = np.zeros_like(counts)
    nonzero = support > 0
    matrix[nonzero] = counts[nonzero] / support[nonzero, None]
    return ConfusionMatrix(matrix=matrix, support=support)


def propose_merges(
    cm: ConfusionMatrix, rules: RuleConfig, table: ClassTable
) -> list[MergeProposal]:
    """Per-class merge candidates after the documented filtering rules."""
    if cm.n_classes > len(table):
        raise ValidationError("confusion matrix is larger than the class table")
    excluded_ids = {table.id_of(name) for name in rules.exclude_classes}
    excluded_pairs = {
        (table.id_of(t), table.id_of(c)) for t, c in rules.exclude_pairs
    }

    proposals: list[MergeProposal] = []
    for target in range(cm.n_classes):
        if cm.support[target] == 0:
            continue
        diag = cm.matrix[target, target]
        raw = [
            (j, float(cm.matrix[target, j]))
            for j in range(cm.n_classes)
            if j != target and cm.matrix[target, j] >= diag and cm.matrix[target, j] > 0
        ]
        raw.sort(key=lambda item: (-item[1], item[0]))
        raw = raw[:5]
        if not raw:
            continue

        trace: list[str] = []
        survivors: list[tuple[int, float]] = []
        for cls, prob in raw:
            if cls in excluded_ids:
                trace.append(f"{RULE_EXCLUDED_CLASS}:{table.name_of(cls)}")
            elif (target, cls) in excluded_pairs:
                trace.append(f"{RULE_EXCLUDED_PAIR}:{table.name_of(cls)}")
            else:
                survivors.append((cls, prob))

        # '-other' stuff classes stay only when every class of their
        # superclass is merged along (present among survivors + target).
        survivor_ids = {cls for cls, _ in survivors} | {target}
        final: list[tuple[int, float]] = []
        for cls, prob in survivors:
            name = table.name_of(cls)
            if name.endswith(rules.other_suffix) and not table.is_thing[cls]:
                group = {
                    i
                    for i in range(len(table))
                    if table.superclass[i] == table.superclass[cls]
                }
                if not group <= survivor_ids:
                    trace.append(f"{RULE_OTHER_SUFFIX}:{name}")
                    continue
            final.append((cls, prob))

        proposals.append(
            MergeProposal(
                target=target, candidates=tuple(final), rule_trace=tuple(trace)
            )
        )
    return proposals


def check_merge_map(merge_map: Mapping[int, int]) -> None:
    """A merge map must be flat: no key may map to another key's source
    (except the trivial identity), otherwise applying it once is not enough."""
    for src, dst in merge_map.items():
        if dst in merge_map and merge_map[dst] != dst:
            raise ValidationError(
                f"merge map chains {src} -> {dst} -> {merge_map[dst]}; flatten it first"
            )


def load_merge_map(path, table: ClassTable) -> dict[int, int]:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    merge_map = {table.id_of(src): table.id_of(dst) for src, dst in raw.items()}
    check_merge_map(merge_map)
    return merge_map


def apply_merge_map_records(eset: EmbeddingSet, merge_map: Mapping[int, int]) -> EmbeddingSet:
    """Relabel object classes through the map; vectors are shared."""
    check_merge_map(merge_map)
    records = []
    for rec in eset.records:
        if rec.object_class is not None and rec.object_class in merge_map:
            records.append(
                EmbeddingRecord(
                    conditioning_id=rec.conditioning_id,
                    seed=rec.seed,
                    kind=rec.kind,
                    granularity=rec.granularity,
                    object_class=merge_map[rec.object_class],
                )
            )
        else:
            records.append(rec)
    return EmbeddingSet(dim=eset.dim, vectors=eset.vectors, records=tuple(records))


def apply_merge_map_conditionings(
    conds: Sequence[Conditioning], merge_map: Mapping[int, int]
) -> list[Conditioning]:
    """Relabel instance classes; coarse sets re-derive automatically."""
    check_merge_map(merge_map)
    out = []
    for cond in conds:
        instances = tuple(
            ObjectInstance(class_id=merge_map.get(inst.class_id, inst.class_id), box=inst.box)
            for inst in cond.instances
        )
        out.append(Conditioning(id=cond.id, instances=instances))
    return out
