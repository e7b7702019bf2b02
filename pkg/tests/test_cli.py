import json

import numpy as np
import pytest

from loadsr.cli import main
from loadsr.csvio import load_csv

TINY = ["--n-days", "12", "--n-households", "3", "--epochs-gan", "1", "--epochs-polish", "1",
        "--batch-size", "8", "--gen-features", "4", "--gen-res-blocks", "1",
        "--pol-features", "4", "--pol-res-blocks", "1"]


def run(*args):
    return main([str(a) for a in args])


def test_synth_and_downsample(tmp_path, capsys):
    assert run("synth", "--n-days", 4, "--households", 2, "--out", tmp_path / "p.csv",
               "--weather-out", tmp_path / "w.csv") == 0
    assert run("downsample", "--input", tmp_path / "p.csv", "--alpha", 6,
               "--out", tmp_path / "lr.csv") == 0
    hr, lr = load_csv(tmp_path / "p.csv"), load_csv(tmp_path / "lr.csv")
    assert len(hr) == 4 and len(lr[0]) == 48
    np.testing.assert_allclose(lr[0].values, hr[0].values.reshape(48, 6).mean(axis=1), rtol=1e-12)


def test_train_is_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("train", *TINY, "--output-dir", out, "--with-cnn") == 0
        outs.append(out)
    for f in ("stage1_log.csv", "cnn_log.csv", "generator.ckpt", "discriminator.ckpt", "cnn.ckpt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_full_workflow(tmp_path, capsys):
    out = tmp_path / "run"
    assert run("train", *TINY, "--output-dir", out, "--with-cnn") == 0
    assert run("polish", "--output-dir", out) == 0
    assert run("eval", "--output-dir", out) == 0
    text = capsys.readouterr().out
    assert "GAN-polished" in text and "CNN" in text
    report = json.loads((out / "report.json").read_text())
    assert set(report["means"]) == {"LERP", "CNN", "GAN-unpolished", "GAN-polished"}
    assert (out / "stage2_log.csv").exists() and (out / "report_long.csv").exists()
    assert run("export-report", "--report", out / "report.json", "--csv", tmp_path / "r.csv") == 0
    assert (tmp_path / "r.csv").read_text().startswith("method,metric,mean,gain_vs_lerp")


def test_config_file_and_csv_data(tmp_path):
    run("synth", "--n-days", 12, "--households", 3, "--out", tmp_path / "p.csv",
        "--weather-out", tmp_path / "w.csv")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("\n".join([f"data_path={tmp_path / 'p.csv'}", f"weather_path={tmp_path / 'w.csv'}",
                              f"output_dir={tmp_path / 'out'}", "epochs_gan=1", "epochs_polish=1",
                              "gen_features=4", "gen_res_blocks=1", "batch_size=8"]) + "\n")
    assert run("train", "--config", cfg) == 0
    assert (tmp_path / "out" / "generator.ckpt").exists()


def test_sweep_and_ablation(tmp_path):
    assert run("sweep-alpha", *TINY, "--output-dir", tmp_path, "--alphas", "3,12") == 0
    assert "alpha,method,metric" in (tmp_path / "sweep.csv").read_text()
    assert run("ablate-weather", *TINY, "--output-dir", tmp_path) == 0
    assert "without-weather" in (tmp_path / "ablation.csv").read_text()


def test_failures_exit_nonzero(tmp_path, capsys):
    assert run("sweep-alpha", *TINY, "--output-dir", tmp_path, "--alphas", "7") == 1
    assert run("eval", "--output-dir", tmp_path / "missing") == 1
    assert run("train", "--data-path", tmp_path / "none.csv", "--output-dir", tmp_path) == 1
    assert run("train", "--epochs-gan", "many", "--output-dir", tmp_path) == 1
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        run("no-such-command")
