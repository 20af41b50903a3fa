"""Label-set metrics: per-image F1 against coarse conditionings, object
classification accuracy, class frequency ranking, and per-class manifold
metric breakdowns.

Predicted labels arrive as JSONL produced by the extraction adapter:
scene mode ``{conditioning_id, seed, labels: [...]}`` and object mode
``{conditioning_id, seed, instance_index, label}``; the object ground truth
is the class of ``instances[instance_index]`` in the resolved conditioning.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .manifold import Manifold, consistency, precision, recall
from .store import (
    ClassTable,
    Conditioning,
    EmbeddingSet,
    filter_set,
    resolve_conditioning,
)


@dataclass(frozen=True)
class ScenePrediction:
    conditioning_id: str
    seed: int
    predicted_set: frozenset[int]


@dataclass(frozen=True)
class ObjectPrediction:
    conditioning_id: str
    seed: int
    instance_index: int
    predicted_class: int


def load_scene_predictions(path, table: ClassTable) -> list[ScenePrediction]:
    preds = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                preds.append(
                    ScenePrediction(
                        conditioning_id=obj["conditioning_id"],
                        seed=int(obj["seed"]),
                        predicted_set=frozenset(table.id_of(n) for n in obj["labels"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as e:
                raise ValidationError(f"{path}:{line_no}: {e}") from None
    return preds


def load_object_predictions(path, table: ClassTable) -> list[ObjectPrediction]:
    preds = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                preds.append(
                    ObjectPrediction(
                        conditioning_id=obj["conditioning_id"],
                        seed=int(obj["seed"]),
                        instance_index=int(obj["instance_index"]),
                        predicted_class=table.id_of(obj["label"]),
                    )
                )
            except (json.JSONDecodeError, KeyError) as e:
                raise ValidationError(f"{path}:{line_no}: {e}") from None
    return preds


def f1_score(predicted: frozenset[int], target: frozenset[int]) -> float:
    """Per-image set F1; two empty sets score 1 by convention."""
    if not predicted and not target:
        return 1.0
    if not predicted or not target:
        return 0.0
    return 2.0 * len(predicted & target) / (len(predicted) + len(target))


def mean_f1(
    predictions: Sequence[ScenePrediction],
    conditionings: Mapping[str, Conditioning],
) -> float:
    """Mean per-image F1 between predicted label sets and coarse targets."""
    if not predictions:
        raise ValidationError("no scene predictions given")
    total = 0.0
    for pred in predictions:
        cond = resolve_conditioning(conditionings, pred.conditioning_id)
        total += f1_score(pred.predicted_set, cond.coarse)
    return total / len(predictions)


def object_accuracy(
    predictions: Sequence[ObjectPrediction],
    conditionings: Mapping[str, Conditioning],
) -> float:
    """Fraction of crops whose predicted class matches the instance class."""
    if not predictions:
        raise ValidationError("no object predictions given")
    correct = 0
    for pred in predictions:
        cond = resolve_conditioning(conditionings, pred.conditioning_id)
        if not (0 <= pred.instance_index < len(cond.instances)):
            raise ValidationError(
                f"instance index {pred.instance_index} out of range for "
                f"conditioning {pred.conditioning_id!r}"
            )
        if cond.instances[pred.instance_index].class_id == pred.predicted_class:
            correct += 1
    return correct / len(predictions)


def class_balanced_accuracy(
    predictions: Sequence[ObjectPrediction],
    conditionings: Mapping[str, Conditioning],
) -> float:
    """Mean of per-class accuracies (classes weighted equally)."""
    if not predictions:
        raise ValidationError("no object predictions given")
    per_class: dict[int, list[int]] = {}
    for pred in predictions:
        cond = resolve_conditioning(conditionings, pred.conditioning_id)
        true_class = cond.instances[pred.instance_index].class_id
        per_class.setdefault(true_class, []).append(
            1 if true_class == pred.predicted_class else 0
        )
    accs = [sum(v) / len(v) for _, v in sorted(per_class.items())]
    return sum(accs) / len(accs)


def top_k_classes(conds: Iterable[Conditioning], k: int) -> list[int]:
    """The k most frequent classes by object-instance count, descending;
    count ties broken by ascending class index."""
    if k < 1:
        raise ValidationError("k must be a positive integer")
    counts: Counter[int] = Counter()
    for cond in conds:
        for inst in cond.instances:
            counts[inst.class_id] += 1
    if not counts:
        raise ValidationError("no object instances to rank")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    if k > len(ranked):
        warnings.warn(
            f"asked for top {k} classes but only {len(ranked)} are present",
            stacklevel=2,
        )
    return [cls for cls, _ in ranked[:k]]


def per_class_report(
    generated: EmbeddingSet,
    real_manifold: Manifold,
    real: EmbeddingSet,
    generated_manifold: Manifold,
    conditionings: Mapping[str, Conditioning],
    class_filter: Sequence[int],
) -> dict[int, dict[str, float]]:
    """Manifold metrics restricted per object class.

    For each class the generated rows, real rows and both manifolds are
    filtered to that class (manifold radii keep their pooled values) and the
    global metrics are recomputed. A class with zero rows on any side is
    absent from the result rather than reported as zero.
    """
    for eset in (generated, real):
        if any(rec.granularity != "object" for rec in eset.records):
            raise ValidationError("per-class reports need object-granularity sets")

    report: dict[int, dict[str, float]] = {}
    for cls in class_filter:
        gen_c = filter_set(generated, lambda r, c=cls: r.object_class == c)
        real_c = filter_set(real, lambda r, c=cls: r.object_class == c)
        real_man_c = real_manifold.subset(
            [i for i, rec in enumerate(real_manifold.record_refs) if rec.object_class == cls]
        )
        gen_man_c = generated_manifold.subset(
            [
                i
                for i, rec in enumerate(generated_manifold.record_refs)
                if rec.object_class == cls
            ]
        )
        if min(gen_c.n, real_c.n, len(real_man_c), len(gen_man_c)) == 0:
            continue
        report[cls] = {
            "precision": precision(gen_c, real_man_c),
            "recall": recall(real_c, gen_man_c),
            "consistency": consistency(gen_c, real_man_c, conditionings),
        }
    return report
