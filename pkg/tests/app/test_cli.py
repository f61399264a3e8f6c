import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from apps.pavenet.app.run import cli
from apps.pavenet.data.synth import generate_clip
from apps.pavenet.evaluation import AnnotationSet, write_posetrack_json
from apps.pavenet.lib.evaluator import clip_ground_truth, oracle_predictions
from apps.pavenet.lib.utils import dump_run_config


@pytest.fixture
def config_path(tiny_run_config, tmp_path):
    path = tmp_path / "tiny.yaml"
    dump_run_config(tiny_run_config, path)

    return path


@pytest.fixture
def trained(config_path, tmp_path):
    out = tmp_path / "run"
    result = CliRunner().invoke(
        cli, ["train", "-c", str(config_path), "-o", str(out), "--no-progress"]
    )
    assert result.exit_code == 0, result.output

    return out


def invoke(*args):
    return CliRunner().invoke(cli, [str(arg) for arg in args])


def test_train_writes_the_run(trained):
    metrics = pd.read_csv(trained / "metrics.csv")

    assert len(metrics) == 2
    assert np.isfinite(metrics["total"]).all()
    assert "val_map" in metrics.columns
    for name in ("model.pave", "train_state.pt", "config.yaml", "val/report.csv"):
        assert (trained / name).exists()


def test_training_is_reproducible(trained, config_path, tmp_path):
    again = tmp_path / "again"
    assert invoke("train", "-c", config_path, "-o", again, "--no-progress").exit_code == 0

    first = pd.read_csv(trained / "metrics.csv")
    second = pd.read_csv(again / "metrics.csv")
    assert second["total"].tolist() == pytest.approx(first["total"].tolist(), rel=1e-9)


def test_resume_continues_the_run(trained):
    result = invoke("train", "-o", trained, "-c", trained / "config.yaml", "--steps", 4, "--resume", "--no-progress")
    assert result.exit_code == 0, result.output

    metrics = pd.read_csv(trained / "metrics.csv")
    assert metrics["step"].tolist() == [0, 1, 2, 3]


def test_invalid_override_names_the_key(config_path, tmp_path):
    result = invoke("train", "-c", config_path, "-o", tmp_path / "bad", "--set", "model.span=7")

    assert result.exit_code == 1
    assert "model.span" in result.output


def test_eval_checkpoint(trained, tmp_path):
    out = tmp_path / "eval"
    result = invoke("eval", "--checkpoint", trained, "-o", out, "--threshold", 0.0, "--overlays")
    assert result.exit_code == 0, result.output

    report = pd.read_csv(out / "report.csv")
    assert len(report) == 16
    assert ((report["ap"] >= 0) & (report["ap"] <= 1)).all()
    assert (out / "predictions.json").exists()
    assert any((out / "overlays").iterdir())


def test_eval_rejects_a_damaged_checkpoint(trained):
    (trained / "model.pave").write_bytes(b"NOPE")
    result = invoke("eval", "--checkpoint", trained)

    assert result.exit_code == 1
    assert "magic" in result.output


def test_eval_files(tmp_path):
    gt = AnnotationSet(images=[clip_ground_truth(generate_clip(s, 3, "easy"), image_id=s) for s in range(3)])
    write_posetrack_json(gt, tmp_path / "gt.json")
    write_posetrack_json(oracle_predictions(gt), tmp_path / "pred.json")

    result = invoke("eval", "--annotations", tmp_path / "gt.json", "--predictions", tmp_path / "pred.json")
    assert result.exit_code == 0, result.output

    report = pd.read_csv(tmp_path / "report.csv")
    assert report["ap"].iloc[-1] == pytest.approx(1.0)


def test_eval_files_threshold_drops_low_scores(tmp_path):
    gt = AnnotationSet(images=[clip_ground_truth(generate_clip(s, 3, "easy"), image_id=s) for s in range(3)])
    pred = oracle_predictions(gt)
    pred.images[0].poses.scores[:] = 0.2
    write_posetrack_json(gt, tmp_path / "gt.json")
    write_posetrack_json(pred, tmp_path / "pred.json")
    args = ("eval", "--annotations", tmp_path / "gt.json", "--predictions", tmp_path / "pred.json")

    assert invoke(*args).exit_code == 0
    assert pd.read_csv(tmp_path / "report.csv")["ap"].iloc[-1] == pytest.approx(1.0)

    result = invoke(*args, "--threshold", "0.3")
    assert result.exit_code == 0, result.output
    assert pd.read_csv(tmp_path / "report.csv")["ap"].iloc[-1] < 1.0


def test_eval_needs_inputs(tmp_path):
    assert invoke("eval").exit_code == 2

    (tmp_path / "gt.json").write_text("{}", encoding="utf-8")
    assert invoke("eval", "--annotations", tmp_path / "gt.json").exit_code == 2


def test_bench(config_path, tmp_path):
    out = tmp_path / "bench.csv"
    result = invoke("bench", "-c", config_path, "--persons", "2,1", "--reps", 2, "--warmup", 0, "-o", out)
    assert result.exit_code == 0, result.output

    frame = pd.read_csv(out)
    assert len(frame) == 4
    assert frame["persons"].tolist() == [1, 1, 2, 2]
    assert set(frame["pipeline"]) == {"pave", "two-stage"}
    assert (frame["reps"] == 2).all()


def test_ablate_variants(config_path, tmp_path):
    out = tmp_path / "ablate"
    result = invoke(
        "ablate", "-c", config_path, "--variant", "pave", "--variant", "no-stjd",
        "--seeds", "0,1", "--steps", 1, "-o", out,
    )
    assert result.exit_code == 0, result.output

    frame = pd.read_csv(out / "ablate.csv")
    assert len(frame) == 4
    assert frame["variant"].tolist() == ["pave", "pave", "no-stjd", "no-stjd"]
    assert (frame.loc[frame["variant"] == "no-stjd", "stjd_params"] == 0).all()
    assert (frame.loc[frame["variant"] == "pave", "stjd_params"] > 0).all()


def test_ablate_usage():
    assert invoke("ablate").exit_code == 2
    assert invoke("ablate", "--variant", "pave-xl").exit_code == 2
