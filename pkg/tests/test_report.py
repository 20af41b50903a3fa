import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sceneval.errors import ValidationError
from sceneval.report import MetricReport, MetricValue, aggregate, run_panel

from panel_fixtures import build_panel_fixture


def test_aggregate_by_hand():
    out = aggregate({"m": [1.0, 1.0, 1.0, 1.0, 1.0]})
    assert out["m"].mean == 1.0 and out["m"].std == 0.0
    out = aggregate({"m": [0.0, 2.0]})
    assert out["m"].mean == 1.0 and out["m"].std == 1.0


def test_aggregate_five_seed_protocol(rng):
    values = rng.random(5).tolist()  # one value per generation process
    out = aggregate({"m": values})
    assert out["m"].per_seed == tuple(values)
    assert out["m"].mean == pytest.approx(np.mean(values))
    assert out["m"].std == pytest.approx(np.std(values))


def test_aggregate_rejects_ragged():
    with pytest.raises(ValidationError, match="ragged"):
        aggregate({"a": [1.0, 2.0], "b": [1.0]})


def test_report_per_seed_lengths_checked():
    with pytest.raises(ValidationError, match="unequal"):
        MetricReport(
            split="S_u",
            granularity="scene",
            metrics={
                "a": MetricValue(1.0, 0.0, (1.0, 1.0)),
                "b": MetricValue(1.0, 0.0, (1.0,)),
            },
            provenance={},
        )


def test_panel_identity_fixture(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng)
    panel = run_panel(config, tmp_path / "out")
    assert len(panel["reports"]) == 6  # 3 splits x 2 granularities
    for report in panel["reports"]:
        m = report["metrics"]
        assert m["precision"]["mean"] == 1.0
        assert m["recall"]["mean"] == 1.0
        assert m["consistency"]["mean"] == 1.0
        assert m["fid"]["mean"] <= 1e-6
        if report["granularity"] == "scene":
            assert m["f1"]["mean"] == 1.0
            assert m["ds"]["mean"] == 0.0
        else:
            assert m["accuracy"]["mean"] == 1.0


def test_panel_far_generated_fixture(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng, gen_offset=1e5)
    panel = run_panel(config, tmp_path / "out")
    for report in panel["reports"]:
        m = report["metrics"]
        assert m["precision"]["mean"] == 0.0
        assert m["recall"]["mean"] == 0.0
        assert m["consistency"]["mean"] == 0.0
        assert m["fid"]["mean"] > 1.0


def test_panel_outputs_and_provenance(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng, jitter=0.5)
    out = tmp_path / "out"
    run_panel(config, out)
    names = sorted(p.name for p in out.iterdir())
    assert "panel.json" in names and "panel.csv" in names
    assert "report_S_s_scene.json" in names and "report_S_u2_object.json" in names

    report = json.loads((out / "report_S_u_scene.json").read_text())
    prov = report["provenance"]
    assert prov["k"] == 2
    assert prov["embedding_source"] == "synthetic-fixture"
    assert prov["toolkit_version"]
    assert all(len(digest) == 64 for digest in prov["inputs"].values())
    assert prov["ds_mode"] == "embedding"

    csv_text = (out / "panel.csv").read_text().splitlines()
    assert csv_text[0] == "split,granularity,metric,seed,value"
    assert any(line.startswith("S_u,scene,precision,1,") for line in csv_text)
    assert any(line.startswith("S_u,scene,ds,all,") for line in csv_text)


def test_panel_mean_std_recomputable(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng, jitter=1.5, seeds=(1, 2, 3))
    panel = run_panel(config, tmp_path / "out")
    for report in panel["reports"]:
        for name, m in report["metrics"].items():
            if not m["per_seed"]:
                continue
            vals = np.array(m["per_seed"])
            assert m["mean"] == pytest.approx(vals.mean(), abs=1e-9)
            assert m["std"] == pytest.approx(vals.std(), abs=1e-9)


def test_panel_byte_identical_reruns(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng, jitter=1.0)
    run_panel(config, tmp_path / "out1")
    run_panel(config, tmp_path / "out2")
    for name in ("panel.json", "panel.csv"):
        assert (tmp_path / "out1" / name).read_bytes() == (
            tmp_path / "out2" / name
        ).read_bytes()


def test_panel_byte_identical_across_thread_counts(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng, jitter=2.0, n_per_split=6)
    outputs = []
    for threads in ("1", "4"):
        outdir = tmp_path / f"out_{threads}"
        env = dict(os.environ, SCENE_EVAL_THREADS=threads)
        code = subprocess.run(
            [
                sys.executable,
                "-m",
                "sceneval.cli",
                "panel",
                "--config",
                str(config),
                "--out",
                str(outdir),
            ],
            env=env,
        ).returncode
        assert code == 0
        outputs.append((outdir / "panel.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_panel_missing_input_fails_cleanly(tmp_path, rng):
    config = build_panel_fixture(tmp_path / "fx", rng)
    raw = json.loads(config.read_text())
    raw["scene"]["real"]["matrix"] = "does_not_exist.cseb"
    config.write_text(json.dumps(raw))
    with pytest.raises(FileNotFoundError):
        run_panel(config, tmp_path / "out")
