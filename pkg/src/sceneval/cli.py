"""scene-eval command line interface.

Exit codes: 0 on success, 2 on validation errors (malformed inputs, contract
violations), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catmerge import (
    ConfusionMatrix,
    RuleConfig,
    apply_merge_map_conditionings,
    apply_merge_map_records,
    load_merge_map,
    one_nn_confusion,
    propose_merges,
)
from .diversity import (
    DS_MODE_EMBEDDING,
    DS_MODE_TABLE,
    ds_from_embeddings,
    ds_from_table,
    load_distance_table,
)
from .errors import NumericalError, ValidationError
from .frechet import covariance_rank, fid_from_stats, fit_gaussian
from .labelmetrics import (
    class_balanced_accuracy,
    load_object_predictions,
    load_scene_predictions,
    mean_f1,
    object_accuracy,
)
from .manifold import DEFAULT_K, compute_radii, consistency, precision, recall
from .report import MetricReport, MetricValue, panel_csv, run_panel
from .splits import (
    class_histogram,
    load_split_assignment,
    partition,
    save_split_assignment,
    subsample_matched,
)
from .store import (
    conditioning_index,
    filter_set,
    load_class_table,
    load_conditionings,
    load_embedding_set,
    save_conditionings,
    save_embedding_set,
)


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_set(args, prefix: str, table):
    return load_embedding_set(
        getattr(args, f"{prefix}_matrix"), getattr(args, f"{prefix}_meta"), table
    )


def _restrict_to_split(eset, split_file: str | None, split: str | None):
    if split_file is None:
        return eset
    if split is None:
        raise ValidationError("--split is required when --split-file is given")
    ids = set(load_split_assignment(split_file).ids_in(split))
    return filter_set(eset, lambda r: r.conditioning_id in ids)


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_split(args) -> None:
    table = load_class_table(args.classes)
    train = load_conditionings(args.train, table)
    evals = load_conditionings(args.eval, table)
    assignment = partition(train, evals, args.validation_size, args.seed)
    save_split_assignment(assignment, args.out)


def cmd_subsample(args) -> None:
    table = load_class_table(args.classes)
    source = load_conditionings(args.source, table)
    target = load_conditionings(args.target, table)
    target_hist = class_histogram(target, count_mode=args.count_mode)
    selected = subsample_matched(
        source, target_hist, args.size, args.seed, count_mode=args.count_mode
    )
    _write_json({"selected": selected, "size": len(selected)}, args.out)


def cmd_radii(args) -> None:
    table = load_class_table(args.classes)
    pool = _load_set(args, "pool", table) if args.pool_matrix else None
    full = _load_set(args, "target", table)
    targets = _restrict_to_split(full, args.split_file, args.split)
    manifold = compute_radii(targets, pool if pool is not None else full, k=args.k)
    _write_json(
        {
            "k": args.k,
            "n_targets": len(manifold),
            "n_pool": (pool if pool is not None else full).n,
            "radii": [float(r) for r in manifold.radii],
        },
        args.out,
    )


def cmd_pr(args) -> None:
    table = load_class_table(args.classes)
    real_all = _load_set(args, "real", table)
    gen_all = _load_set(args, "gen", table)
    if args.gen_seed is not None:
        gen_all = filter_set(gen_all, lambda r: r.seed == args.gen_seed)
    real_split = _restrict_to_split(real_all, args.split_file, args.split)
    gen_split = _restrict_to_split(gen_all, args.split_file, args.split)
    real_manifold = compute_radii(real_split, real_all, k=args.k)
    gen_manifold = compute_radii(gen_split, gen_all, k=args.k)
    payload = {
        "k": args.k,
        "n_real": real_split.n,
        "n_generated": gen_split.n,
        "precision": precision(gen_split, real_manifold),
        "recall": recall(real_split, gen_manifold),
    }
    if args.conditionings:
        conds = conditioning_index(load_conditionings(args.conditionings, table))
        payload["consistency"] = consistency(gen_split, real_manifold, conds)
    _write_json(payload, args.out)


def cmd_consistency(args) -> None:
    table = load_class_table(args.classes)
    real_all = _load_set(args, "real", table)
    gen_all = _load_set(args, "gen", table)
    if args.gen_seed is not None:
        gen_all = filter_set(gen_all, lambda r: r.seed == args.gen_seed)
    real_split = _restrict_to_split(real_all, args.split_file, args.split)
    gen_split = _restrict_to_split(gen_all, args.split_file, args.split)
    real_manifold = compute_radii(real_split, real_all, k=args.k)
    conds = conditioning_index(load_conditionings(args.conditionings, table))
    _write_json(
        {
            "k": args.k,
            "n_real": real_split.n,
            "n_generated": gen_split.n,
            "consistency": consistency(gen_split, real_manifold, conds),
        },
        args.out,
    )


def cmd_fid(args) -> None:
    table = load_class_table(args.classes)
    x = _load_set(args, "x", table)
    y = _load_set(args, "y", table)
    sx, sy = fit_gaussian(x), fit_gaussian(y)
    payload = {
        "fid": fid_from_stats(sx, sy),
        "n_x": x.n,
        "n_y": y.n,
        "dim": x.dim,
        "cov_rank_x": covariance_rank(sx),
        "cov_rank_y": covariance_rank(sy),
    }
    if x.n != y.n:
        payload["warning"] = (
            "sample counts differ; FID is sensitive to sample count, do not "
            "compare this value against reports with other counts"
        )
    _write_json(payload, args.out)


def cmd_diversity(args) -> None:
    if args.embeddings and args.table:
        raise ValidationError("pass either --table or --embeddings, not both")
    if not args.embeddings and not args.table:
        raise ValidationError("pass --table <path> or --embeddings with --matrix/--meta")
    if args.embeddings and not (args.matrix and args.meta and args.classes):
        raise ValidationError("--embeddings mode needs --matrix, --meta and --classes")
    if args.table:
        dtable = load_distance_table(args.table)
        mean, std = ds_from_table(dtable)
        mode = DS_MODE_TABLE
        n_conds = len({cid for cid, _, _ in dtable.entries})
    else:
        table = load_class_table(args.classes)
        eset = load_embedding_set(args.matrix, args.meta, table)
        mean, std = ds_from_embeddings(eset)
        mode = DS_MODE_EMBEDDING
        n_conds = len({rec.conditioning_id for rec in eset.records})
    _write_json(
        {"ds_mean": mean, "ds_std": std, "ds_mode": mode, "n_conditionings": n_conds},
        args.out,
    )


def cmd_setmetrics(args) -> None:
    table = load_class_table(args.classes)
    conds = conditioning_index(load_conditionings(args.conditionings, table))
    if args.granularity == "scene":
        preds = load_scene_predictions(args.predictions, table)
        payload = {"f1": mean_f1(preds, conds), "n": len(preds)}
    else:
        preds = load_object_predictions(args.predictions, table)
        payload = {
            "acc_instance": object_accuracy(preds, conds),
            "acc_class_balanced": class_balanced_accuracy(preds, conds),
            "n": len(preds),
        }
    _write_json(payload, args.out)


def cmd_confusion(args) -> None:
    table = load_class_table(args.classes)
    crops = _load_set(args, "crops", table)
    cm = one_nn_confusion(crops, n_classes=len(table))
    _write_json(
        {
            "classes": list(table.names),
            "matrix": [[float(v) for v in row] for row in cm.matrix],
            "support": [int(s) for s in cm.support],
            "source": args.source,
        },
        args.out,
    )


def cmd_propose_merges(args) -> None:
    table = load_class_table(args.classes)
    with open(args.confusion, "r", encoding="utf-8") as f:
        raw = json.load(f)
    cm = ConfusionMatrix(
        matrix=np.array(raw["matrix"], dtype=np.float64),
        support=np.array(raw["support"], dtype=np.int64),
    )
    rules = RuleConfig.from_json(args.rules) if args.rules else RuleConfig()
    proposals = propose_merges(cm, rules, table)
    _write_json(
        {
            "proposals": [
                {
                    "target": table.name_of(p.target),
                    "candidates": [
                        {"class": table.name_of(c), "probability": prob}
                        for c, prob in p.candidates
                    ],
                    "rule_trace": list(p.rule_trace),
                }
                for p in proposals
            ]
        },
        args.out,
    )


def cmd_apply_merges(args) -> None:
    table = load_class_table(args.classes)
    merge_map = load_merge_map(args.merge_map, table)
    did_something = False
    if args.crops_matrix:
        crops = _load_set(args, "crops", table)
        merged = apply_merge_map_records(crops, merge_map)
        save_embedding_set(merged, args.out_matrix, args.out_meta, table)
        did_something = True
    if args.conditionings:
        conds = load_conditionings(args.conditionings, table)
        merged_conds = apply_merge_map_conditionings(conds, merge_map)
        save_conditionings(merged_conds, args.out_conditionings, table)
        did_something = True
    if not did_something:
        raise ValidationError("nothing to relabel: pass --crops-matrix or --conditionings")


def cmd_panel(args) -> None:
    run_panel(args.config, args.out, k=args.k)


def cmd_plot_data(args) -> None:
    with open(args.panel, "r", encoding="utf-8") as f:
        panel = json.load(f)
    reports = [
        MetricReport(
            split=r["split"],
            granularity=r["granularity"],
            metrics={
                name: MetricValue(
                    mean=m["mean"], std=m["std"], per_seed=tuple(m["per_seed"])
                )
                for name, m in r["metrics"].items()
            },
            provenance=r["provenance"],
        )
        for r in panel["reports"]
    ]
    text = panel_csv(reports)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parser


def _add_set_args(p, prefix: str, required: bool = True) -> None:
    p.add_argument(f"--{prefix}-matrix", required=required)
    p.add_argument(f"--{prefix}-meta", required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scene-eval",
        description="Evaluation toolkit for conditional scene generation "
        "over precomputed embeddings",
    )
    parser.add_argument("--version", action="version", version=f"scene-eval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="build the seen/unseen split assignment")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--validation-size", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("subsample", help="class-distribution-matched subsample")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count-mode", choices=["instances", "images"], default="instances")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_subsample)

    p = sub.add_parser("radii", help="k-NN hypersphere radii for a target set")
    _add_set_args(p, "target")
    _add_set_args(p, "pool", required=False)
    p.add_argument("--classes", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--split-file")
    p.add_argument("--split")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_radii)

    p = sub.add_parser("pr", help="manifold precision and recall")
    _add_set_args(p, "real")
    _add_set_args(p, "gen")
    p.add_argument("--classes", required=True)
    p.add_argument("--conditionings")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--gen-seed", type=int)
    p.add_argument("--split-file")
    p.add_argument("--split")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_pr)

    p = sub.add_parser("consistency", help="conditional consistency")
    _add_set_args(p, "real")
    _add_set_args(p, "gen")
    p.add_argument("--classes", required=True)
    p.add_argument("--conditionings", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--gen-seed", type=int)
    p.add_argument("--split-file")
    p.add_argument("--split")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_consistency)

    p = sub.add_parser("fid", help="Frechet distance between two sets")
    _add_set_args(p, "x")
    _add_set_args(p, "y")
    p.add_argument("--classes", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_fid)

    p = sub.add_parser("diversity", help="intra-conditioning diversity score")
    p.add_argument("--table", help="precomputed pairwise distance JSONL")
    p.add_argument("--embeddings", action="store_true",
                   help="fall back to embedding-space distances")
    p.add_argument("--matrix")
    p.add_argument("--meta")
    p.add_argument("--classes")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_diversity)

    p = sub.add_parser("setmetrics", help="label-set F1 / object accuracy")
    p.add_argument("--predictions", required=True)
    p.add_argument("--granularity", choices=["scene", "object"], required=True)
    p.add_argument("--conditionings", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_setmetrics)

    p = sub.add_parser("confusion", help="1-NN class confusion over crops")
    _add_set_args(p, "crops")
    p.add_argument("--classes", required=True)
    p.add_argument("--source", default="unspecified")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_confusion)

    p = sub.add_parser("propose-merges", help="rule-filtered merge candidates")
    p.add_argument("--confusion", required=True)
    p.add_argument("--rules")
    p.add_argument("--classes", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_propose_merges)

    p = sub.add_parser("apply-merges", help="relabel classes through a merge map")
    p.add_argument("--merge-map", required=True)
    p.add_argument("--classes", required=True)
    _add_set_args(p, "crops", required=False)
    p.add_argument("--out-matrix")
    p.add_argument("--out-meta")
    p.add_argument("--conditionings")
    p.add_argument("--out-conditionings")
    p.set_defaults(fn=cmd_apply_merges)

    p = sub.add_parser("panel", help="full per-split scene/object metric panel")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int)
    p.set_defaults(fn=cmd_panel)

    p = sub.add_parser("plot-data", help="flatten a panel JSON into CSV")
    p.add_argument("--panel", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ValidationError as e:
        print(f"scene-eval: validation error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"scene-eval: numerical failure: {e}", file=sys.stderr)
        return 3
    except FileNotFoundError as e:
        print(f"scene-eval: missing input: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
