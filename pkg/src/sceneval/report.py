"""Seed aggregation and the full metric panel.

A panel run loads real and generated embedding sets (scene-wise and, when
configured, object-wise), a split assignment, conditionings and optional
prediction / distance-table files, then produces one report per
(split, granularity) cell plus a combined panel JSON and a flat CSV.

Per-seed metric values are aggregated as mean and population std, mirroring
reporting over independent generation processes. Manifold radii follow the
pooled rule: real radii come from the union of all real rows (validation
included), generated radii from the union of the same seed's generated rows
across splits; membership is tested against the split's own points only.

Outputs are byte-identical across repeated runs and thread counts: no
timestamps, sorted keys, and deterministic kernels throughout.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .diversity import (
    DS_MODE_EMBEDDING,
    DS_MODE_TABLE,
    PairwiseDistanceTable,
    ds_from_embeddings,
    ds_from_table,
    load_distance_table,
)
from .errors import ValidationError
from .frechet import fid
from .labelmetrics import (
    ObjectPrediction,
    ScenePrediction,
    load_object_predictions,
    load_scene_predictions,
    mean_f1,
    object_accuracy,
)
from .manifold import DEFAULT_K, compute_radii, consistency, precision, recall
from .splits import SplitAssignment, load_split_assignment
from .store import (
    ClassTable,
    Conditioning,
    EmbeddingSet,
    conditioning_index,
    filter_set,
    load_class_table,
    load_conditionings,
    load_embedding_set,
)

SPLIT_LABELS = {"seen": "S_s", "unseen_fg": "S_u", "unseen_coarse": "S_u2"}
DEFAULT_PANEL_SPLITS = ("seen", "unseen_fg", "unseen_coarse")


@dataclass(frozen=True)
class MetricValue:
    mean: float
    std: float
    per_seed: tuple[float, ...]


@dataclass(frozen=True)
class MetricReport:
    split: str  # S_s | S_u | S_u2 | custom
    granularity: str
    metrics: dict[str, MetricValue]
    provenance: dict

    def __post_init__(self) -> None:
        lengths = {len(v.per_seed) for v in self.metrics.values() if v.per_seed}
        if len(lengths) > 1:
            raise ValidationError(
                f"per-seed metric lists have unequal lengths: {sorted(lengths)}"
            )

    def to_json_dict(self) -> dict:
        return {
            "split": self.split,
            "granularity": self.granularity,
            "metrics": {
                name: {"mean": v.mean, "std": v.std, "per_seed": list(v.per_seed)}
                for name, v in self.metrics.items()
            },
            "provenance": self.provenance,
        }


def aggregate(per_seed_values: Mapping[str, Sequence[float]]) -> dict[str, MetricValue]:
    """Mean and population std per metric; all lists must have equal length."""
    lengths = {len(v) for v in per_seed_values.values()}
    if not per_seed_values or lengths == {0}:
        raise ValidationError("nothing to aggregate")
    if len(lengths) != 1:
        raise ValidationError(f"ragged per-seed lists: lengths {sorted(lengths)}")
    out = {}
    for name, values in per_seed_values.items():
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / n
        out[name] = MetricValue(mean=mean, std=var**0.5, per_seed=tuple(values))
    return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# panel configuration


@dataclass(frozen=True)
class _GranularityInputs:
    real: EmbeddingSet
    generated: EmbeddingSet


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_panel_config(config_path) -> dict:
    config_path = Path(config_path)
    with open(config_path, "r", encoding="utf-8") as f:
        config = json.load(f)
    for key in ("class_table", "conditionings", "split_file"):
        if key not in config:
            raise ValidationError(f"panel config is missing required key {key!r}")
    if "scene" not in config and "object" not in config:
        raise ValidationError("panel config needs a 'scene' or 'object' section")
    return config


class PanelRunner:
    """Loads every configured input once and evaluates panel cells."""

    def __init__(self, config: dict, base_dir, k: int | None = None):
        base = Path(base_dir)
        self.config = config
        self.k = int(k if k is not None else config.get("k", DEFAULT_K))
        self.embedding_source = config.get("embedding_source", "unspecified")
        self.inputs: dict[str, str] = {}

        def track(label: str, value: str) -> Path:
            path = _resolve(base, value)
            self.inputs[label] = file_digest(path)
            return path

        self.table: ClassTable = load_class_table(track("class_table", config["class_table"]))
        conds = load_conditionings(
            track("conditionings", config["conditionings"]), self.table
        )
        self.conds: dict[str, Conditioning] = conditioning_index(conds)
        self.assignment: SplitAssignment = load_split_assignment(
            track("split_file", config["split_file"])
        )

        self.sets: dict[str, _GranularityInputs] = {}
        for gran in ("scene", "object"):
            if gran not in config:
                continue
            section = config[gran]
            real = load_embedding_set(
                track(f"{gran}.real.matrix", section["real"]["matrix"]),
                track(f"{gran}.real.meta", section["real"]["meta"]),
                self.table,
            )
            generated = load_embedding_set(
                track(f"{gran}.generated.matrix", section["generated"]["matrix"]),
                track(f"{gran}.generated.meta", section["generated"]["meta"]),
                self.table,
            )
            self.sets[gran] = _GranularityInputs(real=real, generated=generated)

        self.scene_predictions: list[ScenePrediction] | None = None
        self.object_predictions: list[ObjectPrediction] | None = None
        preds = config.get("predictions", {})
        if "scene" in preds:
            self.scene_predictions = load_scene_predictions(
                track("predictions.scene", preds["scene"]), self.table
            )
        if "object" in preds:
            self.object_predictions = load_object_predictions(
                track("predictions.object", preds["object"]), self.table
            )

        self.ds_table: PairwiseDistanceTable | None = None
        if config.get("ds_table"):
            self.ds_table = load_distance_table(track("ds_table", config["ds_table"]))

        self.splits: tuple[str, ...] = tuple(
            config.get("splits", DEFAULT_PANEL_SPLITS)
        )

    def _provenance(self, gran: str, n_real: int, n_generated: int, seeds: list[int]) -> dict:
        return {
            "k": self.k,
            "embedding_source": self.embedding_source,
            "granularity": gran,
            "n_real": n_real,
            "n_generated": n_generated,
            "seeds": seeds,
            "toolkit_version": __version__,
            "inputs": dict(sorted(self.inputs.items())),
            "threads_env": "SCENE_EVAL_THREADS (must not affect outputs)",
        }

    def cell(self, split: str, gran: str) -> MetricReport:
        """Evaluate one (split, granularity) panel cell."""
        if gran not in self.sets:
            raise ValidationError(f"no {gran!r} sets configured")
        data = self.sets[gran]
        split_ids = set(self.assignment.ids_in(split))
        if not split_ids:
            raise ValidationError(f"split {split!r} has no conditionings")

        real_split = filter_set(data.real, lambda r: r.conditioning_id in split_ids)
        gen_split = filter_set(data.generated, lambda r: r.conditioning_id in split_ids)
        if real_split.n == 0 or gen_split.n == 0:
            raise ValidationError(
                f"split {split!r} has no {gran} rows (real {real_split.n}, "
                f"generated {gen_split.n})"
            )
        seeds = sorted({rec.seed for rec in gen_split.records})

        real_manifold = compute_radii(real_split, data.real, k=self.k)

        per_seed: dict[str, list[float]] = {
            "precision": [],
            "recall": [],
            "consistency": [],
            "fid": [],
        }
        for seed in seeds:
            gen_ss = filter_set(gen_split, lambda r, s=seed: r.seed == s)
            gen_pool = filter_set(data.generated, lambda r, s=seed: r.seed == s)
            gen_manifold = compute_radii(gen_ss, gen_pool, k=self.k)
            per_seed["precision"].append(precision(gen_ss, real_manifold))
            per_seed["recall"].append(recall(real_split, gen_manifold))
            per_seed["consistency"].append(consistency(gen_ss, real_manifold, self.conds))
            per_seed["fid"].append(fid(real_split, gen_ss))

        if gran == "scene" and self.scene_predictions is not None:
            per_seed["f1"] = [
                mean_f1(
                    [
                        p
                        for p in self.scene_predictions
                        if p.conditioning_id in split_ids and p.seed == seed
                    ],
                    self.conds,
                )
                for seed in seeds
            ]
        if gran == "object" and self.object_predictions is not None:
            per_seed["accuracy"] = [
                object_accuracy(
                    [
                        p
                        for p in self.object_predictions
                        if p.conditioning_id in split_ids and p.seed == seed
                    ],
                    self.conds,
                )
                for seed in seeds
            ]

        metrics = aggregate(per_seed)
        provenance = self._provenance(gran, real_split.n, gen_split.n, seeds)

        if gran == "scene":
            if self.ds_table is not None:
                restricted = PairwiseDistanceTable(
                    entries={
                        key: d
                        for key, d in self.ds_table.entries.items()
                        if key[0] in split_ids
                    }
                )
                ds_mean, ds_std = ds_from_table(restricted)
                provenance["ds_mode"] = DS_MODE_TABLE
            else:
                ds_mean, ds_std = ds_from_embeddings(gen_split)
                provenance["ds_mode"] = DS_MODE_EMBEDDING
            # DS has no per-seed decomposition: its std runs across
            # conditionings, so the per_seed list stays empty.
            metrics["ds"] = MetricValue(mean=ds_mean, std=ds_std, per_seed=())

        return MetricReport(
            split=SPLIT_LABELS.get(split, "custom"),
            granularity=gran,
            metrics=metrics,
            provenance=provenance,
        )

    def run(self) -> list[MetricReport]:
        reports = []
        for split in self.splits:
            for gran in ("scene", "object"):
                if gran in self.sets:
                    reports.append(self.cell(split, gran))
        return reports


def panel_csv(reports: Sequence[MetricReport]) -> str:
    """Flat CSV: one row per (split, granularity, metric, seed)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["split", "granularity", "metric", "seed", "value"])
    for report in reports:
        seeds = report.provenance.get("seeds", [])
        for name in sorted(report.metrics):
            value = report.metrics[name]
            if value.per_seed:
                for seed, v in zip(seeds, value.per_seed):
                    writer.writerow([report.split, report.granularity, name, seed, repr(v)])
            else:
                writer.writerow([report.split, report.granularity, name, "all", repr(value.mean)])
    return buf.getvalue()


def run_panel(config_path, out_dir, k: int | None = None) -> dict:
    """Run every configured panel cell and write reports under out_dir.

    Returns the combined panel dictionary that was written to panel.json.
    """
    config_path = Path(config_path)
    config = load_panel_config(config_path)
    runner = PanelRunner(config, base_dir=config_path.parent, k=k)
    reports = runner.run()

    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    panel = {
        "reports": [r.to_json_dict() for r in reports],
        "toolkit_version": __version__,
        "k": runner.k,
    }
    for report in reports:
        name = f"report_{report.split}_{report.granularity}.json"
        _dump_json(report.to_json_dict(), out / name)
    _dump_json(panel, out / "panel.json")
    with open(out / "panel.csv", "w", encoding="utf-8", newline="") as f:
        f.write(panel_csv(reports))
    return panel
