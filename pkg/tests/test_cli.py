"""
Pruebas extremo a extremo de la línea de comandos (configuración tiny)
"""

from pathlib import Path

import pandas as pd
import pytest
from omegaconf import OmegaConf

from src.cli import EXIT_DOMAIN_ERROR, main
from src.inference.grid import MANIFEST_COLUMNS, read_manifest
from src.models.latent_core import load_latent

TINY = str(Path(__file__).resolve().parent.parent / "configs" / "tiny.yaml")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset sintético y un modelo entrenado 3 pasos con la CLI"""
    root = tmp_path_factory.mktemp("cli")
    data, run = root / "data", root / "run"
    assert main(["synth-data", "--config", TINY, "--out", str(data)]) == 0
    assert main(["train", "--config", TINY, "--data", str(data), "--out", str(run)]) == 0
    return {"root": root, "data": data, "run": run, "checkpoint": run / "checkpoints" / "latest.pt"}


def _frame(data: Path, identity: str, frame: str):
    return str(data / identity / f"{frame}.img.png"), str(data / identity / f"{frame}.iuv.png")


def test_synth_data_writes_dataset_and_manifest(workspace):
    data = workspace["data"]
    assert (data / "dataset.yaml").is_file()
    assert (data / "config.yaml").is_file()
    manifest = pd.read_csv(data / "manifest.csv")
    assert len(manifest) == 6
    assert (data / "train.txt").read_text().split() == ["id0000", "id0001"]


def test_train_writes_logs_checkpoints_and_config(workspace):
    run = workspace["run"]
    metrics = pd.read_csv(run / "metrics.csv")
    assert metrics["step"].tolist() == [0, 1, 2]
    assert OmegaConf.load(run / "config.yaml").net.preset == "tiny"
    manifest = pd.read_csv(run / "manifest.csv")
    assert "checkpoints/latest.pt" in manifest["file"].tolist()


def test_training_twice_gives_identical_metrics(workspace, tmp_path):
    other = tmp_path / "again"
    assert main(["train", "--config", TINY, "--data", str(workspace["data"]), "--out", str(other)]) == 0
    assert (other / "metrics.csv").read_bytes() == (workspace["run"] / "metrics.csv").read_bytes()


def test_resume_from_cli_matches_full_run(workspace, tmp_path):
    resumed = tmp_path / "resumed"
    checkpoint = workspace["run"] / "checkpoints" / "step_00000002.pt"
    code = main(["train", "--config", TINY, "--data", str(workspace["data"]), "--out", str(resumed),
                 "--resume", str(checkpoint)])
    assert code == 0
    assert (resumed / "metrics.csv").read_bytes() == (workspace["run"] / "metrics.csv").read_bytes()


def test_extract_texture_with_latent(workspace, tmp_path):
    image, iuv = _frame(workspace["data"], "id0000", "000")
    out = tmp_path / "texture"
    code = main(["extract-texture", "--config", TINY, "--image", image, "--iuv", iuv,
                 "--checkpoint", str(workspace["checkpoint"]), "--out", str(out)])
    assert code == 0
    assert (out / "atlas.png").is_file() and (out / "atlas.filled.png").is_file()
    assert load_latent(out / "appearance.latent").shape == (6, 2)


def test_parts_sampling_grid(workspace, tmp_path):
    _, iuv = _frame(workspace["data"], "id0001", "001")
    out = tmp_path / "parts"
    code = main(["parts", "--checkpoint", str(workspace["checkpoint"]), "--pose", iuv, "--group", "head",
                 "--n", "4", "--out", str(out), "--seed", "3"])
    assert code == 0
    manifest = pd.read_csv(out / "manifest.csv")
    assert list(manifest.columns) == MANIFEST_COLUMNS
    assert len(manifest) == 4
    assert set(manifest["group"]) == {"head"}
    assert set(manifest["seed"]) == {3}
    assert (out / "grid.png").is_file()


def test_transfer_over_a_directory_of_targets(workspace, tmp_path):
    image, iuv = _frame(workspace["data"], "id0000", "000")
    out = tmp_path / "transfer"
    code = main(["transfer", "--checkpoint", str(workspace["checkpoint"]), "--image", image, "--iuv", iuv,
                 "--targets", str(workspace["data"] / "id0002"), "--out", str(out)])
    assert code == 0
    manifest = read_manifest(out)
    assert manifest["pose"].tolist() == ["000", "001"]
    assert (out / "appearance.latent").is_file()


def test_garment_and_interpolation(workspace, tmp_path):
    body_image, body_iuv = _frame(workspace["data"], "id0000", "000")
    garment_image, garment_iuv = _frame(workspace["data"], "id0001", "000")
    checkpoint = str(workspace["checkpoint"])
    code = main(["garment", "--checkpoint", checkpoint, "--body-image", body_image, "--body-iuv", body_iuv,
                 "--garment-image", garment_image, "--garment-iuv", garment_iuv, "--group", "upper_body",
                 "--out", str(tmp_path / "garment")])
    assert code == 0
    assert len(pd.read_csv(tmp_path / "garment" / "manifest.csv")) == 1

    code = main(["interp", "--checkpoint", checkpoint, "--image1", body_image, "--iuv1", body_iuv,
                 "--image2", garment_image, "--iuv2", garment_iuv, "--steps", "3",
                 "--out", str(tmp_path / "interp")])
    assert code == 0
    manifest = pd.read_csv(tmp_path / "interp" / "manifest.csv")
    assert manifest["t"].tolist() == [0.0, 0.5, 1.0]


def test_eval_on_sample_outputs_of_two_seeds(workspace, tmp_path):
    _, iuv_a = _frame(workspace["data"], "id0002", "000")
    _, iuv_b = _frame(workspace["data"], "id0002", "001")
    checkpoint = str(workspace["checkpoint"])
    for seed in ("1", "2"):
        code = main(["sample", "--checkpoint", checkpoint, "--pose", iuv_a, iuv_b, "--n", "2",
                     "--seed", seed, "--out", str(tmp_path / f"s{seed}")])
        assert code == 0
    out = tmp_path / "eval"
    code = main(["eval", "--config", TINY, "--samples", str(tmp_path / "s1"), str(tmp_path / "s2"),
                 "--out", str(out)])
    assert code == 0
    report = OmegaConf.load(out / "report.yaml")
    assert report.metrics.diversity > 0
    table = pd.read_csv(out / "diversity_per_pose.csv")
    assert table["samples"].tolist() == [4, 4]


def test_eval_on_model_writes_full_report(workspace, tmp_path):
    out = tmp_path / "eval"
    code = main(["eval", "--config", TINY, "--checkpoint", str(workspace["checkpoint"]),
                 "--data", str(workspace["data"]), "--out", str(out)])
    assert code == 0
    report = OmegaConf.load(out / "report.yaml")
    assert {"diversity", "fid", "transfer_ssim", "transfer_perceptual"} <= set(report.metrics)
    assert set(report.locality) == {"head", "torso"}
    assert (out / "locality.csv").is_file()
    assert (out / "evaluation.html").is_file()


def test_eval_compares_training_runs(workspace, tmp_path):
    noparts = tmp_path / "noparts"
    assert main(["train", "--config", TINY, "--data", str(workspace["data"]), "--out", str(noparts),
                 "--set", "net.mode=noparts"]) == 0
    out = tmp_path / "eval"
    code = main(["eval", "--config", TINY, "--runs", str(workspace["run"]), str(noparts), "--out", str(out)])
    assert code == 0
    summary = pd.read_csv(out / "comparison.csv")
    assert summary["run"].tolist() == ["run", "noparts"]
    assert summary["steps"].tolist() == [3, 3]
    assert list(summary.columns) == ["run", "steps", "loss_vgg", "loss_kl"]
    assert "plotly" in (out / "comparison.html").read_text(encoding="utf-8")
    assert not (out / "report.yaml").exists()


def test_eval_runs_without_metrics_is_a_domain_error(tmp_path, capsys):
    code = main(["eval", "--config", TINY, "--runs", str(tmp_path / "missing"), "--out", str(tmp_path / "eval")])
    assert code == EXIT_DOMAIN_ERROR
    assert "DatasetError" in capsys.readouterr().err


def test_domain_errors_print_one_line_and_exit_2(workspace, tmp_path, capsys):
    _, iuv = _frame(workspace["data"], "id0000", "000")
    code = main(["parts", "--checkpoint", str(workspace["checkpoint"]), "--pose", iuv, "--group", "cape",
                 "--out", str(tmp_path / "bad")])
    assert code == EXIT_DOMAIN_ERROR
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("error=UnknownPartGroupError message=")


def test_checkpoint_mismatch_is_reported(workspace, tmp_path, capsys):
    _, iuv = _frame(workspace["data"], "id0000", "000")
    code = main(["sample", "--checkpoint", str(workspace["checkpoint"]), "--pose", iuv,
                 "--set", "net.preset=desk", "--out", str(tmp_path / "bad")])
    assert code == EXIT_DOMAIN_ERROR
    assert "error=CheckpointMismatchError" in capsys.readouterr().err


def test_missing_checkpoint_is_a_domain_error(tmp_path, capsys):
    code = main(["sample", "--checkpoint", str(tmp_path / "none.pt"), "--pose", "x.iuv.png",
                 "--out", str(tmp_path / "out")])
    assert code == EXIT_DOMAIN_ERROR
    assert "error=CheckpointError" in capsys.readouterr().err
