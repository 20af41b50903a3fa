"""Walkthrough: hypersphere manifolds, precision, recall, consistency.

Real embeddings form per-point hyperspheres reaching the k-th nearest
neighbor; precision asks how many generated points land inside, recall swaps
the roles, and consistency scores the class-set IoU against the nearest
covering real sample (0 outside the manifold).
"""

import numpy as np

from sceneval import compute_radii, consistency, membership, precision, recall
from sceneval.store import Conditioning, EmbeddingRecord, ObjectInstance, make_embedding_set

rng = np.random.default_rng(42)
dim, n = 6, 80

# two "modes" of real data, each tied to one conditioning
centers = {"park": np.zeros(dim), "beach": np.full(dim, 8.0)}
conds = {
    "park": Conditioning("park", (ObjectInstance(0, (0.1, 0.1, 0.4, 0.4)),
                                  ObjectInstance(1, (0.5, 0.5, 0.4, 0.4)))),
    "beach": Conditioning("beach", (ObjectInstance(1, (0.2, 0.2, 0.5, 0.5)),)),
}

real_rows, real_recs = [], []
for i in range(n):
    cid = "park" if i % 2 == 0 else "beach"
    real_rows.append(centers[cid] + rng.standard_normal(dim))
    real_recs.append(EmbeddingRecord(cid, 0, "real", "scene"))
real = make_embedding_set(np.array(real_rows, dtype=np.float32), real_recs)

# generated samples: mostly on-mode, a few far off-mode
gen_rows, gen_recs = [], []
for i in range(60):
    cid = "park" if i % 2 == 0 else "beach"
    offset = rng.standard_normal(dim) * (0.8 if i % 5 else 40.0)
    gen_rows.append(centers[cid] + offset)
    gen_recs.append(EmbeddingRecord(cid, 1, "generated", "scene"))
gen = make_embedding_set(np.array(gen_rows, dtype=np.float32), gen_recs)

# k = 5 spheres, radii from the real set itself (the pooled-radius rule lets
# the pool be a superset of the split when splits are small)
real_manifold = compute_radii(real, real, k=5)
print(f"real manifold: {len(real_manifold)} spheres, "
      f"radius range [{real_manifold.radii.min():.2f}, {real_manifold.radii.max():.2f}]")

p = precision(gen, real_manifold)
gen_manifold = compute_radii(gen, gen, k=5)
r = recall(real, gen_manifold)
c = consistency(gen, real_manifold, conds)
print(f"precision  {p:.3f}   (generated points inside the real manifold)")
print(f"recall     {r:.3f}   (real points inside the generated manifold)")
print(f"consistency{c:8.3f}   (class-set IoU at the nearest covering point)")
assert c <= p  # outside rows add 0 to both; inside rows contribute <= 1

probe = membership(np.asarray(centers["park"], dtype=np.float32), real_manifold)
print(f"\nprobe at the park center: inside={probe.inside}, "
      f"covering reference row {probe.nearest_covering_ref}")
