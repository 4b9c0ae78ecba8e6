"""Command-line front end: subcommands, exit codes, emitted artifacts."""

import json

import numpy as np
import pytest

from fsar.cli import main
from fsar.config import RunConfig
from fsar.errors import ConfigurationError
from fsar.interchange import load_checkpoint, read_features


def _write_config(tmp_path, **overrides):
    cfg = {
        "dataset": {
            "seed": 11,
            "synthetic": {"num_classes": 5, "videos_per_class": 3,
                          "frames": 8, "dim": 16},
        },
        "model": {"dim": 16, "state_dim": 4, "strides": [1, 2]},
        "protocol": {"way": 3, "shot": 1, "queries": 3, "tasks": 5},
        "training": {"episodes": 2, "lr": 1e-3, "seed": 0},
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_train_writes_checkpoint_and_curve(tmp_path):
    cfg = _write_config(tmp_path)
    assert main(["train", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "checkpoint.starck").exists()
    lines = (out / "loss_curve.csv").read_text().strip().splitlines()
    assert lines[0] == "episode,loss"
    assert len(lines) == 3  # header + 2 episodes
    _, config, step = load_checkpoint(out / "checkpoint.starck")
    assert step == 2
    assert config["metric"] == "otam"


def test_train_determinism_identical_artifacts(tmp_path):
    cfg = _write_config(tmp_path)
    out = tmp_path / "out"
    main(["train", "--config", str(cfg)])
    first = {name: (out / name).read_bytes()
             for name in ("loss_curve.csv", "checkpoint.starck")}
    main(["train", "--config", str(cfg)])
    for name, blob in first.items():
        assert (out / name).read_bytes() == blob


def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--config", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path):
    cfg = _write_config(tmp_path, bogus_section={"x": 1})
    assert main(["train", "--config", str(cfg)]) == 2


def test_eval_fresh_model_writes_report(tmp_path):
    cfg = _write_config(tmp_path)
    assert main(["eval", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / "report_otam.json").read_text())
    assert report["tasks"] == 5
    assert 0.0 <= report["mean_accuracy"] <= 1.0


def test_metric_flag_produces_distinct_reports(tmp_path):
    cfg = _write_config(tmp_path)
    assert main(["eval", "--config", str(cfg), "--metric", "otam"]) == 0
    assert main(["eval", "--config", str(cfg), "--metric", "bimhm"]) == 0
    out = tmp_path / "out"
    a = json.loads((out / "report_otam.json").read_text())
    b = json.loads((out / "report_bimhm.json").read_text())
    assert a["metadata"]["metric"] == "otam"
    assert b["metadata"]["metric"] == "bimhm"


def test_eval_checkpoint_dim_mismatch_exits_3(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    main(["train", "--config", str(cfg)])
    ckpt = tmp_path / "out" / "checkpoint.starck"
    cfg32 = _write_config(tmp_path, model={"dim": 32, "state_dim": 4,
                                           "strides": [1, 2]},
                          dataset={"seed": 11,
                                   "synthetic": {"num_classes": 5,
                                                 "videos_per_class": 3,
                                                 "frames": 8, "dim": 32}})
    assert main(["eval", "--config", str(cfg32),
                 "--checkpoint", str(ckpt)]) == 3
    assert "dimension error" in capsys.readouterr().err


def test_toggle_flags(tmp_path):
    cfg = _write_config(tmp_path)
    assert main(["eval", "--config", str(cfg), "--toggle", "stpr=off",
                 "--toggle", "tsa=off"]) == 0
    report = json.loads((tmp_path / "out" / "report_otam.json").read_text())
    assert report["metadata"]["toggles"]["stpr"] is False
    assert main(["eval", "--config", str(cfg), "--toggle", "bogus=on"]) == 2


def test_ablate_single_cell_grid(tmp_path):
    cfg = _write_config(tmp_path, ablate={"axis": "strides",
                                          "stride_grid": [[1]]})
    assert main(["ablate", "--config", str(cfg)]) == 0
    lines = ((tmp_path / "out" / "ablation_summary.csv")
             .read_text().strip().splitlines())
    assert lines[0] == "config,accuracy,ci95_half_width"
    assert len(lines) == 2
    assert lines[1].startswith("strides=1,")


def test_scale_bench_single_length(tmp_path):
    out = tmp_path / "bench"
    assert main(["scale-bench", "--lengths", "8", "--repeats", "1",
                 "--output-dir", str(out)]) == 0
    lines = (out / "scale_bench.csv").read_text().strip().splitlines()
    assert lines[0] == "frames,stpr_seconds,attention_seconds"
    assert len(lines) == 2


def test_synth_writes_parseable_features(tmp_path):
    cfg = _write_config(tmp_path)
    dest = tmp_path / "data.starft"
    assert main(["synth", "--config", str(cfg), "--out", str(dest)]) == 0
    videos, classes = read_features(dest)
    assert len(videos) == 15
    assert len(classes) == 5


def test_config_rejects_unknown_nested_keys():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"protocol": {"way": 5, "shots": 1}})


def test_config_roundtrip_through_dict():
    cfg = RunConfig.from_dict({"metric": "bimhm",
                               "model": {"dim": 32, "heads": 4}})
    again = RunConfig.from_dict(cfg.to_dict())
    assert again.metric == "bimhm"
    assert again.model.dim == 32
    assert again.model_spec().attention_config.heads == 4


def test_config_validates_metric():
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({"metric": "dtw"})
