"""Intra-conditioning diversity score (DS).

DS is the mean pairwise perceptual distance among samples generated from the
same finegrained conditioning across seeds. The perceptual distances are
normally supplied as a precomputed table (one JSONL row per unordered seed
pair); when only embeddings are available, Euclidean distance in embedding
space stands in and reports must carry ds_mode="embedding" to say so.

Aggregation: mean over pairs within each conditioning, then mean and
population std across conditionings, visited in sorted conditioning order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ValidationError
from .store import EmbeddingSet

DS_MODE_TABLE = "lpips_table"
DS_MODE_EMBEDDING = "embedding"


@dataclass(frozen=True)
class PairwiseDistanceTable:
    """Distances keyed by (conditioning_id, seed_i, seed_j) with seed_i < seed_j."""

    entries: dict[tuple[str, int, int], float]

    def __post_init__(self) -> None:
        for (cid, si, sj), dist in self.entries.items():
            if si >= sj:
                raise ValidationError(
                    f"pair ({cid!r}, {si}, {sj}) must satisfy seed_i < seed_j"
                )
            if dist < 0:
                raise ValidationError(f"negative distance for ({cid!r}, {si}, {sj})")


def load_distance_table(path) -> PairwiseDistanceTable:
    entries: dict[tuple[str, int, int], float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                key = (obj["conditioning_id"], int(obj["seed_i"]), int(obj["seed_j"]))
                dist = float(obj["distance"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValidationError(f"{path}:{line_no}: {e}") from None
            if key in entries:
                raise ValidationError(f"{path}:{line_no}: duplicate pair {key}")
            entries[key] = dist
    return PairwiseDistanceTable(entries=entries)


def _aggregate(per_cond_means: dict[str, float]) -> tuple[float, float]:
    values = np.array([per_cond_means[cid] for cid in sorted(per_cond_means)])
    mean = float(values.mean())
    std = float(np.sqrt(((values - mean) ** 2).mean()))  # population std
    return mean, std


def ds_from_table(table: PairwiseDistanceTable) -> tuple[float, float]:
    """(mean, std) of per-conditioning mean pair distances."""
    if not table.entries:
        raise ValidationError("distance table is empty")
    per_cond: dict[str, list[float]] = {}
    for (cid, _, _), dist in table.entries.items():
        per_cond.setdefault(cid, []).append(dist)
    means = {cid: float(np.mean(sorted(vals))) for cid, vals in per_cond.items()}
    return _aggregate(means)


def ds_from_embeddings(generated: EmbeddingSet) -> tuple[float, float]:
    """DS with Euclidean embedding distance standing in for perceptual distance."""
    by_cond: dict[str, dict[int, int]] = {}
    for row, rec in enumerate(generated.records):
        seeds = by_cond.setdefault(rec.conditioning_id, {})
        if rec.seed in seeds:
            raise ValidationError(
                f"duplicate seed {rec.seed} for conditioning {rec.conditioning_id!r}"
            )
        seeds[rec.seed] = row
    if not by_cond:
        raise ValidationError("generated set is empty")

    vectors = np.ascontiguousarray(generated.vectors, dtype=np.float64)
    means: dict[str, float] = {}
    for cid in sorted(by_cond):
        seeds = by_cond[cid]
        if len(seeds) < 2:
            raise ValidationError(
                f"conditioning {cid!r} has {len(seeds)} seed(s), need at least 2"
            )
        dists = []
        for si, sj in combinations(sorted(seeds), 2):
            diff = vectors[seeds[si]] - vectors[seeds[sj]]
            dists.append(float(np.sqrt((diff * diff).sum())))
        # sorted accumulation keeps the mean independent of seed labelling
        means[cid] = float(np.mean(sorted(dists)))
    return _aggregate(means)


def table_from_embeddings(generated: EmbeddingSet) -> PairwiseDistanceTable:
    """Materialize the embedding-distance pairs as a distance table."""
    by_cond: dict[str, dict[int, int]] = {}
    for row, rec in enumerate(generated.records):
        by_cond.setdefault(rec.conditioning_id, {})[rec.seed] = row
    vectors = np.ascontiguousarray(generated.vectors, dtype=np.float64)
    entries: dict[tuple[str, int, int], float] = {}
    for cid in sorted(by_cond):
        for si, sj in combinations(sorted(by_cond[cid]), 2):
            diff = vectors[by_cond[cid][si]] - vectors[by_cond[cid][sj]]
            entries[(cid, si, sj)] = float(np.sqrt((diff * diff).sum()))
    return PairwiseDistanceTable(entries=entries)
