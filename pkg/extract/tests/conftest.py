import json

import numpy as np
import pytest
from PIL import Image

from sceneval_extract.jobs import ExtractionJob, extract_embeddings, lpips_table, predict_labels

CLASSES = {
    "names": ["cat", "dog", "grass"],
    "is_thing": [True, True, False],
    "superclass": ["animal", "animal", "ground"],
}

CONDS = [
    {"id": "a", "instances": [{"class": "cat", "box": [0.1, 0.1, 0.5, 0.5]}]},
    {
        "id": "b",
        "instances": [
            {"class": "cat", "box": [0.0, 0.0, 0.5, 0.9]},
            {"class": "grass", "box": [0.0, 0.5, 1.0, 0.5]},
        ],
    },
    {
        "id": "c",
        "instances": [
            {"class": "cat", "box": [0.1, 0.1, 0.4, 0.4]},
            {"class": "dog", "box": [0.5, 0.5, 0.45, 0.45]},
        ],
    },
    {"id": "d", "instances": [{"class": "dog", "box": [0.2, 0.2, 0.6, 0.6]}]},
]


def paint(path, base, size=48):
    rng = np.random.default_rng(abs(hash(base)) % (2**32))
    arr = rng.integers(0, 255, size=(size, size, 3), dtype=np.uint8)
    Image.fromarray(arr, "RGB").save(path)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """A 10-image toy directory: 4 real conditionings, 3 with 2 seeds each.

    The two generated images of conditioning 'a' are pixel-identical, which
    pins the zero-distance behavior of the perceptual table.
    """
    root = tmp_path_factory.mktemp("toy")
    (root / "classes.json").write_text(json.dumps(CLASSES))
    with open(root / "conds.jsonl", "w") as f:
        for cond in CONDS:
            f.write(json.dumps(cond) + "\n")
    images = root / "images"
    images.mkdir()
    for cond in CONDS:
        paint(images / f"{cond['id']}.png", f"real-{cond['id']}")
    for cid in ("a", "b", "c"):
        for seed in (1, 2):
            name = f"{cid}__s{seed}.png"
            paint(images / name, f"gen-{cid}" if cid == "a" else f"gen-{cid}-{seed}")
    assert len(list(images.iterdir())) == 10
    return root


def job(root, prefix, mode="scene", kind="all", **kwargs):
    return ExtractionJob(
        image_root=root / "images",
        conditioning_file=root / "conds.jsonl",
        class_table_file=root / "classes.json",
        output_prefix=root / prefix,
        crop_mode=mode,
        backbone=kwargs.pop("backbone", "resnet18"),
        kind_filter=kind,
        **kwargs,
    )


@pytest.fixture(scope="session")
def extracted(toy_dataset):
    """Run every adapter job once; tests assert on the written files."""
    root = toy_dataset
    extract_embeddings(job(root, "scene_real", "scene", "real"))
    extract_embeddings(job(root, "scene_gen", "scene", "generated"))
    extract_embeddings(job(root, "obj_real", "object", "real"))
    extract_embeddings(job(root, "obj_gen", "object", "generated"))
    predict_labels(job(root, "scene_preds", "scene", "generated"), threshold=0.5)
    predict_labels(job(root, "obj_preds", "object", "generated"))
    lpips_table(job(root, "lpips"))
    return root
