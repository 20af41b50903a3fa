"""scene-eval-extract command line interface.

Subcommands: embed, predict, lpips. Exit code 2 on validation errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .formats import ExtractError
from .jobs import ExtractionJob, extract_embeddings, lpips_table, predict_labels


def _add_job_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--images", required=True, help="image root directory")
    p.add_argument("--conditionings", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--backbone", default="resnext101_32x8d")
    p.add_argument("--weights", help="optional backbone state-dict path")
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=128)


def _job(args, crop_mode: str, kind_filter: str = "all") -> ExtractionJob:
    return ExtractionJob(
        image_root=Path(args.images),
        conditioning_file=Path(args.conditionings),
        class_table_file=Path(args.classes),
        output_prefix=Path(args.out_prefix),
        crop_mode=crop_mode,
        backbone=args.backbone,
        weights=Path(args.weights) if args.weights else None,
        init_seed=args.init_seed,
        resolution=args.resolution,
        kind_filter=kind_filter,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scene-eval-extract",
        description="Produce embeddings, label predictions and perceptual "
        "distance tables in the evaluation toolkit's file formats",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed scenes or things-class object crops")
    _add_job_args(p)
    p.add_argument("--mode", choices=["scene", "object"], default="scene")
    p.add_argument("--kind", choices=["real", "generated", "all"], default="all")
    p.set_defaults(cmd="embed")

    p = sub.add_parser("predict", help="predicted label sets / crop classes")
    _add_job_args(p)
    p.add_argument("--mode", choices=["scene", "object"], default="scene")
    p.add_argument("--kind", choices=["real", "generated", "all"], default="generated")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--head-weights", help="optional linear-head state-dict path")
    p.set_defaults(cmd="predict")

    p = sub.add_parser("lpips", help="pairwise seed distances per conditioning")
    _add_job_args(p)
    p.set_defaults(cmd="lpips")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "embed":
            prov = extract_embeddings(_job(args, args.mode, args.kind))
        elif args.cmd == "predict":
            prov = predict_labels(
                _job(args, args.mode, args.kind),
                threshold=args.threshold,
                head_weights=Path(args.head_weights) if args.head_weights else None,
            )
        else:
            prov = lpips_table(_job(args, "scene"))
    except ExtractError as e:
        print(f"scene-eval-extract: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"scene-eval-extract: missing input: {e}", file=sys.stderr)
        return 2
    print(f"wrote outputs for backbone {prov['backbone']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
