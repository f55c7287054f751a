"""Command-line behavior: outputs, config precedence, exit codes."""

import csv
import json

import numpy as np
import pytest

from qconv.cli import main, parse_seeds, run_gradient_check
from qconv.tetris import load_dataset


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# gen-data

def test_gen_data_writes_dataset(tmp_path, capsys):
    out = tmp_path / "data.jsonl"
    assert main(["gen-data", "--n", "120", "--seed", "3", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "120 samples" in printed
    for fragment in ("S: 8", "L: 16", "O: 4", "T: 8", "I: 6"):
        assert fragment in printed
    dataset = load_dataset(out)
    assert len(dataset) == 120
    assert dataset.class_names == ("S", "L", "O", "T", "I")


def test_gen_data_label_subset(tmp_path):
    out = tmp_path / "two.jsonl"
    assert main(["gen-data", "--n", "100", "--labels", "S,T", "--out", str(out)]) == 0
    dataset = load_dataset(out)
    assert dataset.class_names == ("S", "T")
    assert set(s.label for s in dataset.samples) <= {0, 1}


def test_gen_data_unknown_label_is_config_error(tmp_path, capsys):
    out = tmp_path / "x.jsonl"
    assert main(["gen-data", "--labels", "S,Q", "--out", str(out)]) == 1
    assert "config error" in capsys.readouterr().err


def test_gen_data_bad_path_is_io_error(tmp_path, capsys):
    assert main(["gen-data", "--n", "5", "--out", str(tmp_path / "no" / "dir" / "f.jsonl")]) == 3
    assert "io error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train

def test_train_writes_csv_and_summary(tmp_path):
    out = tmp_path / "results"
    code = main([
        "train", "--model", "cnn", "--arch", "one-layer", "--labels", "2",
        "--images", "40", "--iterations", "6", "--eval-every", "3",
        "--seeds", "2", "--out-dir", str(out),
    ])
    assert code == 0
    rows = read_csv(out / "metrics_cnn_one-layer_2label.csv")
    assert rows[0] == [
        "iteration",
        "seed0_train_loss", "seed0_test_loss", "seed0_test_accuracy",
        "seed1_train_loss", "seed1_test_loss", "seed1_test_accuracy",
        "mean_train_loss", "mean_test_loss", "mean_test_accuracy",
    ]
    assert [r[0] for r in rows[1:]] == ["3", "6"]
    summary = json.loads((out / "summary_cnn_one-layer_2label.json").read_text())
    assert summary["config"]["seeds"] == [0, 1]
    assert summary["config"]["model"] == "cnn"
    assert 0.0 <= summary["final"]["mean_test_accuracy"] <= 1.0
    assert summary["wall_time_seconds"] > 0


def test_train_zero_iterations_is_config_error(capsys):
    assert main(["train", "--iterations", "0"]) == 1
    err = capsys.readouterr().err
    assert "config error" in err and "iterations" in err


def test_train_csv_floats_have_full_precision(tmp_path):
    out = tmp_path / "res"
    main(["train", "--model", "cnn", "--labels", "2", "--images", "30",
          "--iterations", "2", "--eval-every", "2", "--seeds", "1", "--out-dir", str(out)])
    rows = read_csv(out / "metrics_cnn_one-layer_2label.csv")
    value = rows[1][1]
    assert float(value) != 0.0
    assert len(value.replace("-", "").replace(".", "").lstrip("0")) >= 15


# ---------------------------------------------------------------------------
# config file handling

def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# experiment settings\n"
        "model = cnn\n"
        "labels = 2\n"
        "images = 30\n"
        "iterations = 4\n"
        "eval_every = 2\n"
        "seeds = 1\n"
        f"out_dir = {tmp_path / 'from_file'}\n"
    )
    # flag overrides the file's iterations
    assert main(["train", "--config", str(cfg), "--iterations", "2"]) == 0
    rows = read_csv(tmp_path / "from_file" / "metrics_cnn_one-layer_2label.csv")
    assert [r[0] for r in rows[1:]] == ["2"]


def test_config_file_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("modle = cnn\n")
    assert main(["train", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "modle" in err


def test_config_file_bad_value_names_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("iterations = soon\n")
    assert main(["train", "--config", str(cfg)]) == 1
    assert "iterations" in capsys.readouterr().err


def test_unknown_flag_is_config_error(capsys):
    assert main(["train", "--warp-speed", "9"]) == 1
    assert "config error" in capsys.readouterr().err


def test_parse_seeds_forms():
    assert parse_seeds("3") == (0, 1, 2)
    assert parse_seeds("4,7") == (4, 7)
    with pytest.raises(ValueError):
        parse_seeds("0.5")
    with pytest.raises(ValueError):
        parse_seeds("0,x")


# ---------------------------------------------------------------------------
# gradcheck

def test_gradcheck_passes_and_reports(capsys):
    assert main(["gradcheck", "--cases", "25", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "max deviation" in out
    assert "PASS" in out


def test_gradcheck_depth_zero_trivially_passes():
    assert main(["gradcheck", "--cases", "5", "--depth", "0"]) == 0


def test_gradcheck_detects_injected_wrong_shift(capsys):
    code = main(["gradcheck", "--cases", "5", "--inject-shift", str(np.pi / 2)])
    assert code == 2
    out = capsys.readouterr().out
    assert "FAIL" in out and "deviation" in out


def test_gradcheck_report_contents():
    report = run_gradient_check(cases=10, seed=0)
    assert report["passed"]
    assert report["max_deviation"] <= report["tolerance"]
    bad = run_gradient_check(cases=5, seed=0, inject_shift=1.0)
    assert not bad["passed"]
    assert bad["worst"]["kind"] in ("parameter", "input")


# ---------------------------------------------------------------------------
# repro

REPRO_FLAGS = ["--images", "30", "--iterations", "4", "--eval-every", "2", "--seeds", "2"]


def test_repro_single_panel(tmp_path):
    out = tmp_path / "repro"
    assert main(["repro", "--panel", "a", "--out-dir", str(out), *REPRO_FLAGS]) == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["panel_a_accuracy_2label.csv", "repro_summary.json"]
    rows = read_csv(out / "panel_a_accuracy_2label.csv")
    assert rows[0] == ["iteration", "cnn_one_layer", "cnn_two_layer",
                       "qccnn_one_layer", "qccnn_two_layer"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]


def test_repro_all_panels_and_summary(tmp_path, capsys):
    out = tmp_path / "repro"
    assert main(["repro", "--out-dir", str(out), *REPRO_FLAGS]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "panel_a_accuracy_2label.csv",
        "panel_b_accuracy_5label.csv",
        "panel_c_loss_2label.csv",
        "panel_d_loss_5label.csv",
        "repro_summary.json",
    ]
    summary = json.loads((out / "repro_summary.json").read_text())
    assert len(summary["runs"]) == 8
    assert set(summary["loss_ordering"]) == {
        "one-layer_2label", "two-layer_2label", "one-layer_5label", "two-layer_5label",
    }
    assert "loss_ordering_reproduced" in summary
    assert "reduced/custom seed set" in capsys.readouterr().out


def test_repro_identical_configs_are_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["repro", "--panel", "c", "--out-dir", str(out_a), *REPRO_FLAGS]) == 0
    assert main(["repro", "--panel", "c", "--out-dir", str(out_b), *REPRO_FLAGS]) == 0
    a = (out_a / "panel_c_loss_2label.csv").read_bytes()
    b = (out_b / "panel_c_loss_2label.csv").read_bytes()
    assert a == b
