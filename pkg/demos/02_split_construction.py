"""Walkthrough: seen / unseen split construction and class-distribution tools.

Builds a synthetic conditioning corpus, partitions the evaluation pool into
unseen-finegrained / unseen-coarse / validation, checks the invariants with
the independent validator, and subsamples the seen split to match another
split's class distribution.
"""

import numpy as np

from sceneval import (
    class_histogram,
    long_tail_fraction,
    partition,
    subsample_matched,
    top_k_classes,
    validate_assignment,
)
from sceneval.splits import final_l1
from sceneval.store import Conditioning, ObjectInstance


def cond(cid, classes):
    return Conditioning(
        id=cid,
        instances=tuple(
            ObjectInstance(class_id=c, box=(0.1, 0.1, 0.2, 0.2)) for c in classes
        ),
    )


rng = np.random.default_rng(7)

# training corpus: label sets drawn from a small family of combinations
train_patterns = [(0,), (0, 1), (1, 2), (0, 2)]
train = [cond(f"t{i}", train_patterns[i % 4]) for i in range(40)]

# evaluation corpus: half reuse training combinations, half introduce new ones
evals = [cond(f"e{i}", train_patterns[i % 4]) for i in range(20)]
evals += [cond(f"n{i}", (3, i % 3)) for i in range(12)]

assignment = partition(train, evals, validation_size=6, rng_seed=0)
for split in ("seen", "unseen_fg", "unseen_coarse", "validation"):
    print(f"{split:14s} {len(assignment.ids_in(split))} conditionings")

problems = validate_assignment(assignment, train, evals)
print("independent validator:", "clean" if not problems else problems)

# class statistics and the long tail
hist = class_histogram(train)
head = top_k_classes(train, 2)
print(f"\ntrain histogram: {hist.counts} (total {hist.total})")
print(f"top-2 head classes: {head}, "
      f"long-tail fraction {long_tail_fraction(hist, head):.2f}")

# matched subsampling: pick seen conditionings whose histogram tracks the
# unseen-finegrained split's distribution
target = class_histogram([e for e in evals if assignment.assignment[e.id] == "unseen_fg"])
selected = subsample_matched(train, target, size=10, rng_seed=1)
print(f"\nmatched subsample of 10 seen conditionings: final L1 = "
      f"{final_l1(selected, train, target):.4f}")
print("selection order:", selected)
