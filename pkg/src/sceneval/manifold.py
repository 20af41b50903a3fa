"""Hypersphere-manifold estimation and the precision / recall / consistency
metrics computed against it.

A manifold is the union of hyperspheres around reference embeddings, each
sphere reaching the point's k-th nearest neighbor (k=5 by default) inside a
radius pool that may be larger than the reference set itself: split-level
manifolds take their radii from the pooled real (or pooled generated) sets
while membership is tested only against the split's own points.

All distances are Euclidean, computed in float64 as sum of squared
coordinate differences followed by a square root. Kernels are blocked over
rows and may run on several threads; per-row results never share an
accumulator, so outputs are bit-identical for any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._parallel import concat_row_blocks, map_row_blocks
from .errors import ValidationError
from .store import Conditioning, EmbeddingRecord, EmbeddingSet, resolve_conditioning

DEFAULT_K = 5


@dataclass(frozen=True, eq=False)
class Manifold:
    """Reference points with per-point radii and their source records."""

    points: np.ndarray  # (M, dim) float64
    radii: np.ndarray  # (M,) float64, >= 0
    record_refs: tuple[EmbeddingRecord, ...]
    k: int

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.radii.shape != (self.points.shape[0],):
            raise ValidationError("points and radii shapes are inconsistent")
        if len(self.record_refs) != self.points.shape[0]:
            raise ValidationError("record_refs length does not match points")
        if self.radii.size and self.radii.min() < 0:
            raise ValidationError("radii must be non-negative")
        self.points.setflags(write=False)
        self.radii.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, indices: Sequence[int]) -> "Manifold":
        """Restrict to the given reference points, keeping their radii."""
        idx = list(indices)
        return Manifold(
            points=np.ascontiguousarray(self.points[idx]),
            radii=np.ascontiguousarray(self.radii[idx]),
            record_refs=tuple(self.record_refs[i] for i in idx),
            k=self.k,
        )


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    nearest_covering_ref: int | None

    def __post_init__(self) -> None:
        if self.inside != (self.nearest_covering_ref is not None):
            raise ValidationError("nearest_covering_ref present iff inside")


def _distance_block(targets64: np.ndarray, pool64: np.ndarray) -> np.ndarray:
    # Pinned formula: per-pair sum of squared diffs over the contiguous last
    # axis, then sqrt. Reassociating this (e.g. via a GEMM identity) would
    # break exact agreement with the brute-force oracle.
    diff = targets64[:, None, :] - pool64[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def pairwise_distances(targets: np.ndarray, pool: np.ndarray, block: int = 64) -> np.ndarray:
    """Full (n_targets, n_pool) Euclidean distance matrix in float64."""
    t64 = np.ascontiguousarray(targets, dtype=np.float64)
    p64 = np.ascontiguousarray(pool, dtype=np.float64)
    parts = map_row_blocks(lambda lo, hi: _distance_block(t64[lo:hi], p64), len(t64), block)
    return concat_row_blocks(parts)


def _detect_overlap(targets: EmbeddingSet, pool: EmbeddingSet) -> bool:
    if targets is pool:
        return True
    pool_ids = {id(rec) for rec in pool.records}
    hits = sum(1 for rec in targets.records if id(rec) in pool_ids)
    if hits == 0:
        return False
    if hits == targets.n:
        return True
    raise ValidationError(
        "targets partially overlap the radius pool; pass targets_in_pool explicitly"
    )


def compute_radii(
    targets: EmbeddingSet,
    radius_pool: EmbeddingSet,
    k: int = DEFAULT_K,
    targets_in_pool: bool | None = None,
    block: int = 64,
) -> Manifold:
    """Build the manifold over ``targets`` with k-th nearest neighbor radii.

    Radii are measured against ``radius_pool``. When the targets are rows of
    the pool (detected through shared record objects, or forced with
    ``targets_in_pool``) each target's own row is excluded from the neighbor
    count; coincident duplicate rows still count as neighbors.
    """
    if k < 1:
        raise ValidationError("k must be a positive integer")
    if targets.dim != radius_pool.dim:
        raise ValidationError(
            f"dim mismatch: targets {targets.dim} vs pool {radius_pool.dim}"
        )
    if targets_in_pool is None:
        targets_in_pool = _detect_overlap(targets, radius_pool)
    min_pool = k + 1 if targets_in_pool else k
    if radius_pool.n < min_pool:
        raise ValidationError(
            f"radius pool has {radius_pool.n} rows, need at least {min_pool} for k={k}"
        )

    t64 = np.ascontiguousarray(targets.vectors, dtype=np.float64)
    p64 = np.ascontiguousarray(radius_pool.vectors, dtype=np.float64)
    kth = k if targets_in_pool else k - 1  # index into ascending distances

    def block_radii(lo: int, hi: int) -> np.ndarray:
        dists = _distance_block(t64[lo:hi], p64)
        part = np.partition(dists, kth, axis=1)[:, kth]
        return part

    parts = map_row_blocks(block_radii, targets.n, block)
    radii = concat_row_blocks(parts) if parts else np.zeros(0, dtype=np.float64)
    return Manifold(points=t64, radii=radii, record_refs=targets.records, k=k)


def _covering_refs(
    queries64: np.ndarray, manifold: Manifold, block: int = 64
) -> np.ndarray:
    """Per query: index of the nearest covering reference point, or -1.

    Covering means distance <= radius; among covering points the one at
    minimal distance wins, exact ties going to the lowest index.
    """
    points = manifold.points
    radii = manifold.radii

    def block_refs(lo: int, hi: int) -> np.ndarray:
        dists = _distance_block(queries64[lo:hi], points)
        covered = dists <= radii[None, :]
        masked = np.where(covered, dists, np.inf)
        refs = np.argmin(masked, axis=1)
        refs[~covered.any(axis=1)] = -1
        return refs

    if len(manifold) == 0:
        return np.full(len(queries64), -1, dtype=np.intp)
    parts = map_row_blocks(block_refs, len(queries64), block)
    return concat_row_blocks(parts)


def membership(query: np.ndarray, manifold: Manifold) -> MembershipResult:
    """Test whether a single query vector lies inside the manifold."""
    q = np.ascontiguousarray(query, dtype=np.float64).reshape(1, -1)
    if q.shape[1] != manifold.dim:
        raise ValidationError(f"query dim {q.shape[1]} != manifold dim {manifold.dim}")
    ref = int(_covering_refs(q, manifold)[0])
    if ref < 0:
        return MembershipResult(inside=False, nearest_covering_ref=None)
    return MembershipResult(inside=True, nearest_covering_ref=ref)


def membership_refs(queries: EmbeddingSet, manifold: Manifold) -> np.ndarray:
    """Vector of nearest covering reference indices (-1 when outside)."""
    if queries.dim != manifold.dim:
        raise ValidationError(
            f"dim mismatch: queries {queries.dim} vs manifold {manifold.dim}"
        )
    q64 = np.ascontiguousarray(queries.vectors, dtype=np.float64)
    return _covering_refs(q64, manifold)


def precision(generated: EmbeddingSet, real_manifold: Manifold) -> float:
    """Fraction of generated rows lying inside the real manifold."""
    if generated.n == 0:
        raise ValidationError("precision of an empty generated set is undefined")
    refs = membership_refs(generated, real_manifold)
    return float((refs >= 0).sum()) / generated.n


def recall(real: EmbeddingSet, generated_manifold: Manifold) -> float:
    """Fraction of real rows lying inside the generated manifold."""
    if real.n == 0:
        raise ValidationError("recall of an empty real set is undefined")
    refs = membership_refs(real, generated_manifold)
    return float((refs >= 0).sum()) / real.n


def class_set_iou(a: frozenset[int], b: frozenset[int]) -> float:
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def consistency(
    generated: EmbeddingSet,
    real_manifold: Manifold,
    conditionings: Mapping[str, Conditioning],
) -> float:
    """Mean class-set IoU between each generated sample's conditioning and
    that of its nearest covering real point; 0 for samples outside the
    manifold."""
    if generated.n == 0:
        raise ValidationError("consistency of an empty generated set is undefined")
    refs = membership_refs(generated, real_manifold)
    total = 0.0
    for row, ref in enumerate(refs):
        if ref < 0:
            continue
        gen_cond = resolve_conditioning(
            conditionings, generated.records[row].conditioning_id
        )
        ref_cond = resolve_conditioning(
            conditionings, real_manifold.record_refs[ref].conditioning_id
        )
        total += class_set_iou(gen_cond.coarse, ref_cond.coarse)
    return total / generated.n
