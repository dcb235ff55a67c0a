from pathlib import Path

import numpy as np
import pytest

from ecgemotion import cli
from ecgemotion.config import PipelineConfig
from ecgemotion.types import ConfigError

REPO_ROOT = Path(__file__).resolve().parent.parent


def test_defaults_roundtrip_through_text():
    cfg = PipelineConfig()
    assert PipelineConfig.from_text(cfg.to_text()) == cfg


def test_reference_config_file_matches_defaults():
    cfg = PipelineConfig.from_file(REPO_ROOT / "configs" / "reference.cfg")
    assert cfg == PipelineConfig()


def test_reference_defaults_carry_reported_values():
    # the reported experiment settings ship as the bundled reference state
    cfg = PipelineConfig()
    assert (cfg.svm_c, cfg.svm_gamma) == (100.3, 0.016)
    assert cfg.feature_count == 75
    assert cfg.forest_trees == 90
    assert cfg.knn_k == 3
    assert (cfg.sample_rate_hz, cfg.record_duration_s) == (128.0, 300.0)
    assert (cfg.fir_low_hz, cfg.fir_high_hz) == (3.0, 100.0)
    assert (cfg.train_size, cfg.test_size, cfg.runs) == (4000, 1200, 10)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_text("not_a_knob=1\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_text("runs=ten\n")
    with pytest.raises(ConfigError):
        PipelineConfig.from_text("zscore=maybe\n")
    with pytest.raises(ConfigError):
        PipelineConfig.from_text("classifier=tree\n")


def test_overlapping_subjects_rejected():
    with pytest.raises(ConfigError):
        PipelineConfig.from_text("train_subjects=1,2,5\ntest_subjects=5\n")


def test_layered_configs(tmp_path):
    base = tmp_path / "base.cfg"
    base.write_text("runs=3\nseed=7\n")
    overlay = tmp_path / "overlay.cfg"
    overlay.write_text("seed=11\n")
    cfg = PipelineConfig.from_files([base, overlay])
    assert cfg.runs == 3 and cfg.seed == 11


def test_comments_and_blank_lines():
    cfg = PipelineConfig.from_text("# comment\n\nruns=2  # trailing\n")
    assert cfg.runs == 2


@pytest.fixture(scope="module")
def mini_cfg_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "mini.cfg"
    path.write_text(
        "record_duration_s=24\n"
        "train_size=120\n"
        "test_size=60\n"
        "feature_count=30\n"
        "runs=1\n"
        "svm_tune=false\n"
        "svm_c=10\n"
        "svm_gamma=0.05\n"
        "forest_trees=10\n"
        "seed=42\n"
    )
    return str(path)


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory, mini_cfg_file):
    """Run synth + filter once; later tests reuse the directories."""
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "raw"
    filtered = root / "filtered"
    assert cli.main(["synth", "--config", mini_cfg_file, "--out", str(raw)]) == 0
    assert (
        cli.main(
            [
                "filter",
                "--config",
                mini_cfg_file,
                "--in",
                str(raw),
                "--out",
                str(filtered),
                "--taps-out",
                str(root / "taps.csv"),
            ]
        )
        == 0
    )
    return root, raw, filtered


def test_synth_writes_twenty_files(pipeline_dirs):
    _, raw, _ = pipeline_dirs
    files = sorted(p.name for p in raw.glob("*.csv"))
    assert len(files) == 20  # 5 subjects x 4 emotions
    assert "s1_e0.csv" in files and "s5_e3.csv" in files


def test_filter_outputs_and_taps(pipeline_dirs):
    root, raw, filtered = pipeline_dirs
    assert len(list(filtered.glob("*.csv"))) == 20
    taps = (root / "taps.csv").read_text().splitlines()
    assert taps[0].startswith("# fs=128.0,low=3.0,high=57.6")
    assert len(taps) == 1 + 257


def test_full_cli_chain(pipeline_dirs, mini_cfg_file, tmp_path):
    _, _, filtered = pipeline_dirs
    train_csv = tmp_path / "train.csv"
    test_csv = tmp_path / "test.csv"
    model = tmp_path / "model.svm"
    preds = tmp_path / "preds.csv"
    assert (
        cli.main(
            [
                "extract",
                "--config",
                mini_cfg_file,
                "--in",
                str(filtered),
                "--train-out",
                str(train_csv),
                "--test-out",
                str(test_csv),
            ]
        )
        == 0
    )
    assert len(train_csv.read_text().splitlines()) == 121
    assert len(test_csv.read_text().splitlines()) == 61

    assert (
        cli.main(
            ["train", "--config", mini_cfg_file, "--features", str(train_csv), "--model", str(model)]
        )
        == 0
    )
    assert model.read_text().startswith("svm v1 classes=4")

    assert (
        cli.main(
            ["predict", "--model", str(model), "--features", str(test_csv), "--out", str(preds)]
        )
        == 0
    )
    lines = preds.read_text().splitlines()
    assert lines[0] == "label"
    assert len(lines) == 61

    prefix = tmp_path / "run0"
    assert (
        cli.main(
            [
                "evaluate",
                "--features",
                str(test_csv),
                "--predictions",
                str(preds),
                "--out-prefix",
                str(prefix),
            ]
        )
        == 0
    )
    confusion_lines = (tmp_path / "run0.confusion.csv").read_text().splitlines()
    assert confusion_lines[0] == "true_label,pred_0,pred_1,pred_2,pred_3"
    counts = np.array([[int(v) for v in line.split(",")[1:]] for line in confusion_lines[1:]])
    assert counts.sum() == 60

    report_prefix = tmp_path / "report"
    assert (
        cli.main(
            ["report", "--runs", str(tmp_path / "run0.rates.csv"), "--out-prefix", str(report_prefix)]
        )
        == 0
    )
    assert (tmp_path / "report.csv").exists()
    assert "Average recognition rate" in (tmp_path / "report.txt").read_text()


def test_evaluate_with_model_matches_predictions(pipeline_dirs, mini_cfg_file, tmp_path):
    _, _, filtered = pipeline_dirs
    train_csv = tmp_path / "train.csv"
    test_csv = tmp_path / "test.csv"
    model = tmp_path / "model.knn"
    cli.main(
        [
            "extract",
            "--config",
            mini_cfg_file,
            "--in",
            str(filtered),
            "--train-out",
            str(train_csv),
            "--test-out",
            str(test_csv),
        ]
    )
    cli.main(
        [
            "train",
            "--config",
            mini_cfg_file,
            "--classifier",
            "knn",
            "--features",
            str(train_csv),
            "--model",
            str(model),
        ]
    )
    assert (
        cli.main(
            [
                "evaluate",
                "--features",
                str(test_csv),
                "--model",
                str(model),
                "--out-prefix",
                str(tmp_path / "knn"),
            ]
        )
        == 0
    )
    assert (tmp_path / "knn.confusion.csv").exists()


def test_tune_writes_trace(pipeline_dirs, mini_cfg_file, tmp_path):
    _, _, filtered = pipeline_dirs
    train_csv = tmp_path / "train.csv"
    test_csv = tmp_path / "test.csv"
    cli.main(
        [
            "extract",
            "--config",
            mini_cfg_file,
            "--in",
            str(filtered),
            "--train-out",
            str(train_csv),
            "--test-out",
            str(test_csv),
        ]
    )
    trace = tmp_path / "trace.csv"
    params = tmp_path / "tuned.cfg"
    overlay = (
        "pso_swarm_size=3\npso_iterations=2\npso_subsample=60\npso_cv_folds=3\nseed=42\n"
    )
    overlay_path = tmp_path / "pso.cfg"
    overlay_path.write_text(overlay)
    assert (
        cli.main(
            [
                "tune",
                "--config",
                mini_cfg_file,
                "--config",
                str(overlay_path),
                "--features",
                str(train_csv),
                "--trace-out",
                str(trace),
                "--params-out",
                str(params),
            ]
        )
        == 0
    )
    lines = trace.read_text().splitlines()
    assert lines[0] == "iteration,particle,c,gamma,fitness,global_best_fitness"
    assert len(lines) == 1 + 3 * 3  # header + swarm x (init + 2 iterations)
    tuned = PipelineConfig.from_file(params)
    assert tuned.svm_c > 0 and tuned.svm_gamma > 0


def test_exit_codes(tmp_path, mini_cfg_file):
    # 2: io (missing file)
    assert cli.main(["predict", "--model", str(tmp_path / "nope.svm"), "--features", "x", "--out", "y"]) == 2
    # 4: config violation
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("nonsense=1\n")
    assert cli.main(["synth", "--config", str(bad_cfg), "--out", str(tmp_path / "o")]) == 4
    # 3: malformed data file
    bad_csv = tmp_path / "bad.csv"
    bad_csv.write_text("wrong,header\n1,2\n")
    model = tmp_path / "m.knn"
    model.write_text("knn v1 k=1 metric=euclidean\nlabel,f1\n0,1.0\n")
    assert cli.main(["predict", "--model", str(model), "--features", str(bad_csv), "--out", str(tmp_path / "p.csv")]) == 3
    # 1: usage error
    assert cli.main(["synth"]) == 1
    assert cli.main(["not-a-command"]) == 1


def test_seed_flag_overrides_config(pipeline_dirs, mini_cfg_file, tmp_path):
    _, _, filtered = pipeline_dirs
    outs = []
    for seed_args in ([], ["--seed", "43"]):
        train_csv = tmp_path / f"train{len(outs)}.csv"
        test_csv = tmp_path / f"test{len(outs)}.csv"
        cli.main(
            [
                "extract",
                "--config",
                mini_cfg_file,
                *seed_args,
                "--in",
                str(filtered),
                "--train-out",
                str(train_csv),
                "--test-out",
                str(test_csv),
            ]
        )
        outs.append(train_csv.read_text())
    assert outs[0] != outs[1]
