"""Seen / unseen split construction and class-distribution tooling.

The partition puts every training conditioning in ``seen``; evaluation
conditionings whose coarse label set never occurs among the seen coarse sets
become ``unseen_coarse``; the rest are split between ``validation`` (a
seeded uniform draw of the requested size) and ``unseen_fg``. Coarse-set
*equality* decides whether an object combination was seen.

Matched subsampling greedily picks conditionings that keep the running
normalized class histogram closest (L1) to a target histogram.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .store import Conditioning, EmbeddingSet, ObjectInstance

SPLIT_NAMES = ("seen", "unseen_fg", "unseen_coarse", "validation")

# classes outside the most frequent 25 count as long tail
LONG_TAIL_HEAD_SIZE = 25


@dataclass(frozen=True)
class SplitAssignment:
    assignment: dict[str, str]

    def __post_init__(self) -> None:
        for cid, split in self.assignment.items():
            if split not in SPLIT_NAMES:
                raise ValidationError(f"unknown split {split!r} for {cid!r}")

    def ids_in(self, split: str) -> list[str]:
        if split not in SPLIT_NAMES:
            raise ValidationError(f"unknown split {split!r}")
        return [cid for cid, s in self.assignment.items() if s == split]


def save_split_assignment(assignment: SplitAssignment, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(assignment.assignment, f, sort_keys=True, indent=2)
        f.write("\n")


def load_split_assignment(path) -> SplitAssignment:
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: split file must map conditioning ids to splits")
    return SplitAssignment(assignment=dict(raw))


@dataclass(frozen=True)
class ClassHistogram:
    counts: dict[int, int]
    total: int

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts.values()):
            raise ValidationError("histogram counts must be non-negative")
        if self.total != sum(self.counts.values()):
            raise ValidationError("histogram total does not equal the sum of counts")

    def normalized(self) -> dict[int, float]:
        if self.total == 0:
            raise ValidationError("cannot normalize an empty histogram")
        return {cls: cnt / self.total for cls, cnt in self.counts.items()}


def class_histogram(
    conds: Iterable[Conditioning], count_mode: str = "instances"
) -> ClassHistogram:
    """Class counts over conditionings.

    ``instances`` counts every object instance (multiset); ``images`` counts
    each class at most once per conditioning.
    """
    if count_mode not in ("instances", "images"):
        raise ValidationError(f"unknown count mode {count_mode!r}")
    counts: Counter[int] = Counter()
    for cond in conds:
        if count_mode == "instances":
            for inst in cond.instances:
                counts[inst.class_id] += 1
        else:
            for cls in cond.coarse:
                counts[cls] += 1
    return ClassHistogram(counts=dict(counts), total=sum(counts.values()))


def add_histograms(a: ClassHistogram, b: ClassHistogram) -> ClassHistogram:
    counts = Counter(a.counts)
    counts.update(b.counts)
    return ClassHistogram(counts=dict(counts), total=a.total + b.total)


def long_tail_fraction(hist: ClassHistogram, head: Sequence[int]) -> float:
    """Fraction of instances outside the given head classes."""
    if hist.total == 0:
        raise ValidationError("long-tail fraction of an empty histogram is undefined")
    missing = [cls for cls in head if cls not in hist.counts]
    if missing:
        warnings.warn(
            f"{len(missing)} head class(es) absent from the histogram", stacklevel=2
        )
    head_count = sum(hist.counts.get(cls, 0) for cls in set(head))
    return (hist.total - head_count) / hist.total


def long_tail_head(
    conds: Iterable[Conditioning], size: int = LONG_TAIL_HEAD_SIZE
) -> list[int]:
    """The head classes whose complement defines the long tail."""
    from .labelmetrics import top_k_classes

    return top_k_classes(conds, size)


def partition(
    train_conds: Sequence[Conditioning],
    eval_conds: Sequence[Conditioning],
    validation_size: int,
    rng_seed: int,
) -> SplitAssignment:
    """Assign train conditionings to seen and eval conditionings to
    unseen_coarse / validation / unseen_fg."""
    train_ids = {c.id for c in train_conds}
    if len(train_ids) != len(train_conds):
        raise ValidationError("duplicate ids among training conditionings")
    eval_ids = {c.id for c in eval_conds}
    if len(eval_ids) != len(eval_conds):
        raise ValidationError("duplicate ids among evaluation conditionings")
    overlap = train_ids & eval_ids
    if overlap:
        raise ValidationError(f"train and eval conditionings share ids: {sorted(overlap)[:5]}")
    if validation_size < 0:
        raise ValidationError("validation_size must be non-negative")

    seen_coarse = {c.coarse for c in train_conds}
    assignment = {c.id: "seen" for c in train_conds}
    seen_coarse_evals = []
    for cond in eval_conds:
        if cond.coarse in seen_coarse:
            seen_coarse_evals.append(cond.id)
        else:
            assignment[cond.id] = "unseen_coarse"
    if validation_size > len(seen_coarse_evals):
        raise ValidationError(
            f"validation_size {validation_size} exceeds the {len(seen_coarse_evals)} "
            "eval conditionings with seen coarse sets"
        )
    rng = np.random.default_rng(rng_seed)
    if validation_size and seen_coarse_evals:
        chosen = rng.choice(len(seen_coarse_evals), size=validation_size, replace=False)
    else:
        chosen = np.zeros(0, dtype=np.intp)
    validation_ids = {seen_coarse_evals[i] for i in chosen}
    for cid in seen_coarse_evals:
        assignment[cid] = "validation" if cid in validation_ids else "unseen_fg"
    return SplitAssignment(assignment=assignment)


def validate_assignment(
    assignment: SplitAssignment,
    train_conds: Sequence[Conditioning],
    eval_conds: Sequence[Conditioning],
) -> list[str]:
    """Independent check of the split invariants; returns violation messages.

    Deliberately recomputes coarse sets from raw instances instead of
    trusting the Conditioning.coarse field or the partition logic.
    """
    problems: list[str] = []
    train_coarse = []
    train_ids = set()
    for cond in train_conds:
        train_coarse.append(tuple(sorted({inst.class_id for inst in cond.instances})))
        train_ids.add(cond.id)
    train_coarse_set = set(train_coarse)

    for cond in train_conds:
        if assignment.assignment.get(cond.id) != "seen":
            problems.append(f"training conditioning {cond.id!r} not assigned to seen")

    for cond in eval_conds:
        split = assignment.assignment.get(cond.id)
        coarse = tuple(sorted({inst.class_id for inst in cond.instances}))
        if split is None:
            problems.append(f"eval conditioning {cond.id!r} missing from the assignment")
        elif split == "unseen_coarse":
            if coarse in train_coarse_set:
                problems.append(
                    f"{cond.id!r} marked unseen_coarse but its label set occurs in seen"
                )
        elif split in ("unseen_fg", "validation"):
            if coarse not in train_coarse_set:
                problems.append(
                    f"{cond.id!r} marked {split} but its label set never occurs in seen"
                )
            if cond.id in train_ids:
                problems.append(f"{cond.id!r} marked {split} but its layout is in seen")
        elif split == "seen":
            problems.append(f"eval conditioning {cond.id!r} assigned to seen")
    return problems


def _l1_to_target(
    running: np.ndarray, running_total: int, target_norm: np.ndarray
) -> float:
    if running_total == 0:
        return float(np.abs(target_norm).sum())
    return float(np.abs(running / running_total - target_norm).sum())


def subsample_matched(
    source: Sequence[Conditioning],
    target_hist: ClassHistogram,
    size: int,
    rng_seed: int,
    count_mode: str = "instances",
) -> list[str]:
    """Greedy class-distribution-matched subsample of ``size`` conditionings.

    Each step picks the candidate whose inclusion minimizes the L1 distance
    between the running normalized histogram and the normalized target, ties
    broken by a seeded uniform draw. Returns conditioning ids in selection
    order.
    """
    if size > len(source):
        raise ValidationError(f"cannot draw {size} conditionings from {len(source)}")
    if size < 0:
        raise ValidationError("size must be non-negative")
    if target_hist.total == 0:
        raise ValidationError("target histogram is empty")

    classes = sorted(
        set(target_hist.counts)
        | {inst.class_id for cond in source for inst in cond.instances}
    )
    index = {cls: i for i, cls in enumerate(classes)}
    target_norm = np.zeros(len(classes))
    for cls, cnt in target_hist.counts.items():
        target_norm[index[cls]] = cnt / target_hist.total

    cand_hists = np.zeros((len(source), len(classes)))
    for i, cond in enumerate(source):
        hist = class_histogram([cond], count_mode=count_mode)
        for cls, cnt in hist.counts.items():
            cand_hists[i, index[cls]] = cnt
    cand_totals = cand_hists.sum(axis=1)

    rng = np.random.default_rng(rng_seed)
    remaining = list(range(len(source)))
    running = np.zeros(len(classes))
    running_total = 0.0
    selected: list[str] = []
    for _ in range(size):
        cand = np.array(remaining)
        new_counts = running[None, :] + cand_hists[cand]
        new_totals = running_total + cand_totals[cand]
        scores = np.abs(new_counts / new_totals[:, None] - target_norm[None, :]).sum(axis=1)
        best = scores.min()
        minimizers = np.flatnonzero(scores == best)
        pick = minimizers[0] if len(minimizers) == 1 else rng.choice(minimizers)
        chosen = remaining.pop(int(pick))
        running += cand_hists[chosen]
        running_total += cand_totals[chosen]
        selected.append(source[chosen].id)
    return selected


def final_l1(
    selected_ids: Sequence[str],
    source: Sequence[Conditioning],
    target_hist: ClassHistogram,
    count_mode: str = "instances",
) -> float:
    """L1 distance between a selection's normalized histogram and the target."""
    by_id = {c.id: c for c in source}
    hist = class_histogram([by_id[cid] for cid in selected_ids], count_mode=count_mode)
    classes = sorted(set(target_hist.counts) | set(hist.counts))
    t = np.array([target_hist.counts.get(c, 0) / target_hist.total for c in classes])
    if hist.total == 0:
        return float(np.abs(t).sum())
    s = np.array([hist.counts.get(c, 0) / hist.total for c in classes])
    return float(np.abs(s - t).sum())


def crop_pseudo_conditionings(crops: EmbeddingSet) -> list[Conditioning]:
    """Single-instance pseudo-conditionings for object-level matched
    subsampling, one per crop row."""
    conds = []
    for row, rec in enumerate(crops.records):
        if rec.granularity != "object" or rec.object_class is None:
            raise ValidationError("pseudo-conditionings need object-granularity rows")
        conds.append(
            Conditioning(
                id=f"{rec.conditioning_id}#crop{row}",
                instances=(ObjectInstance(class_id=rec.object_class, box=(0.0, 0.0, 1.0, 1.0)),),
            )
        )
    return conds
