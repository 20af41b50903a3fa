"""Extraction jobs: embeddings, label predictions, and distance tables.

Image discovery follows a filename convention under the image root:
``<conditioning_id><ext>`` is the real image for that conditioning and
``<conditioning_id>__s<seed><ext>`` is the generated image from that seed.
Every stem must resolve against the conditioning file.

Object mode crops each instance whose class is a *things* class (stuff
instances are skipped), denormalizes its box against the source image size,
and embeds the crop; rows keep the source conditioning id and seed. A crop
whose pixel box collapses to zero area is an error.

Each job writes a ``<prefix>.provenance.json`` sidecar recording the
backbone identifier, resize policy and resolution; the emitted data files
carry exactly the consumer's documented fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbone import IMAGENET_MEAN, IMAGENET_STD, Backbone, LinearHead
from .formats import (
    ClassTable,
    ExtractError,
    LayoutConditioning,
    atomic_write_text,
    load_class_table,
    load_conditionings,
    write_jsonl,
    write_matrix,
    write_meta,
)

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")
RESIZE_FILTER = Image.BILINEAR
SEED_SEP = "__s"


@dataclass(frozen=True)
class ImageEntry:
    conditioning_id: str
    seed: int
    kind: str  # real | generated
    path: Path


@dataclass(frozen=True)
class ExtractionJob:
    image_root: Path
    conditioning_file: Path
    class_table_file: Path
    output_prefix: Path
    crop_mode: str = "scene"  # scene | object
    backbone: str = "resnext101_32x8d"
    weights: Path | None = None
    init_seed: int = 0
    resolution: int = 128
    kind_filter: str = "all"  # real | generated | all

    def __post_init__(self) -> None:
        if self.crop_mode not in ("scene", "object"):
            raise ExtractError(f"crop_mode must be scene or object, got {self.crop_mode!r}")
        if self.kind_filter not in ("real", "generated", "all"):
            raise ExtractError(f"kind filter must be real/generated/all, got {self.kind_filter!r}")


def discover_images(image_root, conds: dict[str, LayoutConditioning]) -> list[ImageEntry]:
    """Scan the image root and bind files to conditionings and seeds."""
    root = Path(image_root)
    if not root.is_dir():
        raise ExtractError(f"image root {root} is not a directory")
    entries = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTS:
            continue
        stem = path.stem
        if SEED_SEP in stem:
            cid, _, seed_part = stem.rpartition(SEED_SEP)
            try:
                seed = int(seed_part)
            except ValueError:
                raise ExtractError(f"{path.name}: cannot parse seed from {seed_part!r}") from None
            kind = "generated"
        else:
            cid, seed, kind = stem, 0, "real"
        if cid not in conds:
            raise ExtractError(f"{path.name}: no conditioning with id {cid!r}")
        entries.append(ImageEntry(conditioning_id=cid, seed=seed, kind=kind, path=path))
    if not entries:
        raise ExtractError(f"no images found under {root}")
    entries.sort(key=lambda e: (e.conditioning_id, e.kind, e.seed))
    return entries


def _to_tensor(img: Image.Image, resolution: int) -> torch.Tensor:
    img = img.convert("RGB").resize((resolution, resolution), RESIZE_FILTER)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(arr.transpose(2, 0, 1))


def _crop_box(img: Image.Image, box, source: str) -> Image.Image:
    x, y, w, h = box
    width, height = img.size
    left = int(round(x * width))
    top = int(round(y * height))
    right = int(round((x + w) * width))
    bottom = int(round((y + h) * height))
    right = min(right, width)
    bottom = min(bottom, height)
    if right <= left or bottom <= top:
        raise ExtractError(f"{source}: box {box} collapses to zero pixel area")
    return img.crop((left, top, right, bottom))


def _provenance(job: ExtractionJob, extractor_id: str, extra: dict | None = None) -> dict:
    payload = {
        "backbone": extractor_id,
        "resolution": job.resolution,
        "resize_filter": "bilinear",
        "normalization": "imagenet-mean-std",
        "crop_mode": job.crop_mode,
        "kind_filter": job.kind_filter,
    }
    if extra:
        payload.update(extra)
    return payload


def _filtered_entries(job: ExtractionJob, conds) -> list[ImageEntry]:
    entries = discover_images(job.image_root, conds)
    if job.kind_filter != "all":
        entries = [e for e in entries if e.kind == job.kind_filter]
        if not entries:
            raise ExtractError(f"no {job.kind_filter} images under {job.image_root}")
    return entries


def _iter_units(
    job: ExtractionJob, entries, conds, table: ClassTable
):
    """Yield (tensor, meta_row, conditioning, instance_index) per output row."""
    for entry in entries:
        with Image.open(entry.path) as img:
            img.load()
            if job.crop_mode == "scene":
                yield (
                    _to_tensor(img, job.resolution),
                    {
                        "conditioning_id": entry.conditioning_id,
                        "seed": entry.seed,
                        "kind": entry.kind,
                        "granularity": "scene",
                    },
                    conds[entry.conditioning_id],
                    None,
                )
                continue
            cond = conds[entry.conditioning_id]
            for idx, inst in enumerate(cond.instances):
                cls = table.id_of(inst.class_name)
                if not table.is_thing[cls]:
                    continue  # stuff crops are never embedded
                crop = _crop_box(img, inst.box, f"{entry.path.name}[{idx}]")
                yield (
                    _to_tensor(crop, job.resolution),
                    {
                        "conditioning_id": entry.conditioning_id,
                        "seed": entry.seed,
                        "kind": entry.kind,
                        "granularity": "object",
                        "object_class": inst.class_name,
                    },
                    cond,
                    idx,
                )


_BATCH = 16


def _extract_rows(job: ExtractionJob, backbone: Backbone):
    table = load_class_table(job.class_table_file)
    conds = load_conditionings(job.conditioning_file)
    entries = _filtered_entries(job, conds)

    tensors, metas, idxs = [], [], []
    for tensor, meta, _, idx in _iter_units(job, entries, conds, table):
        tensors.append(tensor)
        metas.append(meta)
        idxs.append(idx)
    if not tensors:
        raise ExtractError("no rows to embed (object mode with no things instances?)")
    feats = []
    for lo in range(0, len(tensors), _BATCH):
        feats.append(backbone.features(torch.stack(tensors[lo : lo + _BATCH])))
    return np.concatenate(feats, axis=0), metas, idxs, table


def extract_embeddings(job: ExtractionJob) -> dict:
    """Embed scenes or object crops; writes .cseb + .meta.jsonl + provenance."""
    backbone = Backbone(job.backbone, weights_path=job.weights, init_seed=job.init_seed)
    vectors, metas, _, _ = _extract_rows(job, backbone)
    prefix = Path(job.output_prefix)
    write_matrix(prefix.with_suffix(".cseb"), vectors)
    write_meta(prefix.with_suffix(".meta.jsonl"), metas)
    prov = _provenance(job, backbone.identifier, {"rows": len(metas), "dim": int(vectors.shape[1])})
    atomic_write_text(
        prefix.with_suffix(".provenance.json"), json.dumps(prov, indent=2, sort_keys=True) + "\n"
    )
    return prov


def predict_labels(job: ExtractionJob, threshold: float = 0.5, head_weights=None) -> dict:
    """Emit predicted label sets (scene mode) or per-crop classes (object mode).

    Scene rows become {conditioning_id, seed, labels: [...]} with labels =
    classes whose sigmoid score clears the threshold (possibly empty); object
    rows become {conditioning_id, seed, instance_index, label} with the
    argmax class.
    """
    backbone = Backbone(job.backbone, weights_path=job.weights, init_seed=job.init_seed)
    vectors, metas, idxs, table = _extract_rows(job, backbone)
    head = LinearHead(
        backbone.feature_dim, len(table.names), weights_path=head_weights, init_seed=job.init_seed
    )
    logits = head.logits(vectors)
    rows = []
    if job.crop_mode == "scene":
        scores = 1.0 / (1.0 + np.exp(-logits))
        for meta, score in zip(metas, scores):
            labels = [table.names[i] for i in np.flatnonzero(score >= threshold)]
            rows.append(
                {
                    "conditioning_id": meta["conditioning_id"],
                    "seed": meta["seed"],
                    "labels": labels,
                }
            )
    else:
        picks = logits.argmax(axis=1)
        for meta, idx, pick in zip(metas, idxs, picks):
            rows.append(
                {
                    "conditioning_id": meta["conditioning_id"],
                    "seed": meta["seed"],
                    "instance_index": idx,
                    "label": table.names[int(pick)],
                }
            )
    prefix = Path(job.output_prefix)
    write_jsonl(prefix.with_suffix(".jsonl"), rows)
    prov = _provenance(
        job,
        backbone.identifier,
        {"head": head.identifier, "threshold": threshold if job.crop_mode == "scene" else None},
    )
    atomic_write_text(
        prefix.with_suffix(".provenance.json"), json.dumps(prov, indent=2, sort_keys=True) + "\n"
    )
    return prov


def lpips_table(job: ExtractionJob) -> dict:
    """Perceptual distances between all seed pairs of each conditioning.

    Considers generated images only; every conditioning with generated
    images must have at least two seeds.
    """
    backbone = Backbone(job.backbone, weights_path=job.weights, init_seed=job.init_seed)
    conds = load_conditionings(job.conditioning_file)
    entries = [e for e in discover_images(job.image_root, conds) if e.kind == "generated"]
    if not entries:
        raise ExtractError("no generated images for distance pairs")
    by_cond: dict[str, dict[int, Path]] = {}
    for e in entries:
        seeds = by_cond.setdefault(e.conditioning_id, {})
        if e.seed in seeds:
            raise ExtractError(f"duplicate seed {e.seed} for conditioning {e.conditioning_id!r}")
        seeds[e.seed] = e.path

    rows = []
    for cid in sorted(by_cond):
        seeds = by_cond[cid]
        if len(seeds) < 2:
            raise ExtractError(f"conditioning {cid!r} has {len(seeds)} seed image(s), need >= 2")
        tensors = {}
        for seed, path in seeds.items():
            with Image.open(path) as img:
                img.load()
                tensors[seed] = _to_tensor(img, job.resolution)
        for si, sj in combinations(sorted(seeds), 2):
            rows.append(
                {
                    "conditioning_id": cid,
                    "seed_i": si,
                    "seed_j": sj,
                    "distance": backbone.perceptual_distance(tensors[si], tensors[sj]),
                }
            )
    prefix = Path(job.output_prefix)
    write_jsonl(prefix.with_suffix(".jsonl"), rows)
    prov = _provenance(
        job,
        backbone.identifier,
        {"metric": "stage-normalized feature distance, unit layer weights", "pairs": len(rows)},
    )
    atomic_write_text(
        prefix.with_suffix(".provenance.json"), json.dumps(prov, indent=2, sort_keys=True) + "\n"
    )
    return prov
