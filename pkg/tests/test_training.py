import numpy as np
import pytest

from loadsr.networks import load_checkpoint
from loadsr.training import (RunConfig, TrainingAborted, ablate_weather, evaluate, generate,
                             method_outputs, polish, prepare_data, run_pipeline, sweep_alpha,
                             train_cnn, train_stage1, train_stage2)

TINY = dict(n_days=24, n_households=4, epochs_gan=1, epochs_polish=1, batch_size=8,
            gen_features=4, gen_res_blocks=1, pol_features=4, pol_res_blocks=1)


@pytest.fixture(scope="module")
def cfg():
    return RunConfig(**TINY)


@pytest.fixture(scope="module")
def data(cfg):
    return prepare_data(cfg)


def arrays_equal(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


def test_defaults_follow_hyperparameter_table():
    c = RunConfig()
    assert (c.lr, c.lambda_adv, c.lambda_feat, c.batch_size, c.k_max, c.s_max) == \
        (1e-4, 0.05, 0.5, 32, 3, 1)
    assert (c.epochs_gan, c.epochs_polish, c.beta1, c.beta2, c.noise_var) == (300, 300, 0.99, 0.999, 0.01)
    d = RunConfig.desk()
    assert (d.epochs_gan, d.epochs_polish, d.n_days) == (30, 30, 2000)


def test_config_file_round_trip(tmp_path):
    c = RunConfig(alpha=12, weather=False, lr=3e-4, output_dir="x")
    c.save(tmp_path / "c.txt")
    assert RunConfig.load(tmp_path / "c.txt") == c
    assert RunConfig.load(tmp_path / "c.txt", seed=5).seed == 5


def test_config_file_errors(tmp_path):
    (tmp_path / "a.txt").write_text("# comment\nalpha = 3\nbogus=1\n")
    with pytest.raises(ValueError, match="bogus"):
        RunConfig.load(tmp_path / "a.txt")
    (tmp_path / "b.txt").write_text("weather=maybe\n")
    with pytest.raises(ValueError, match="boolean"):
        RunConfig.load(tmp_path / "b.txt")
    (tmp_path / "c.txt").write_text("alpha\n")
    with pytest.raises(ValueError, match="key=value"):
        RunConfig.load(tmp_path / "c.txt")


def test_prepared_data_shapes(cfg, data):
    lr, w, hr = data.arrays("train")
    n = len(data.split.train)
    assert lr.shape == (n, 1, 48) and w.shape == (n, 5, 48) and hr.shape == (n, 1, 288)
    assert abs(hr.mean()) < 1e-9
    np.testing.assert_allclose(w.mean(axis=(0, 2)), 0, atol=1e-9)
    assert data.lr.min() >= 0


def test_smoke_eight_days():
    c = RunConfig(**{**TINY, "n_days": 8})
    res = train_stage1(c, prepare_data(c))
    assert len(res.log.rows) == 1
    assert all(np.isfinite(v) for v in res.log.rows[0].values())
    assert set(res.log.rows[0]) == set(res.log.columns)


def test_stage1_deterministic(cfg, data):
    c = cfg.replace(epochs_gan=5)
    a, b = train_stage1(c, data), train_stage1(c, data)
    assert a.log.rows == b.log.rows
    assert arrays_equal(a.generator.arrays(), b.generator.arrays())
    assert arrays_equal(a.discriminator.arrays(), b.discriminator.arrays())


def test_zero_weights_reproduce_cnn_trace(cfg, data):
    c = cfg.replace(epochs_gan=3)
    cnn = train_cnn(c, data)
    gan = train_stage1(c.replace(lambda_adv=0.0, lambda_feat=0.0), data)
    assert [r["L_G"] for r in cnn.log.rows] == [r["L_G"] for r in gan.log.rows]
    assert [r["L_cont"] for r in cnn.log.rows] == [r["L_cont"] for r in gan.log.rows]
    assert arrays_equal(cnn.generator.arrays(), gan.generator.arrays())


def test_zero_epoch_polisher_is_identity(cfg, data):
    gen = train_stage1(cfg, data).generator
    pol = train_stage2(cfg.replace(epochs_polish=0), gen, data).polisher
    lr, w, _ = data.arrays("test")
    raw = generate(gen, lr, w)
    assert np.array_equal(polish(pol, raw), raw)


def test_polishing_loss_decreases_and_generator_frozen(cfg, data):
    gen = train_stage1(cfg, data).generator
    before = {k: v.copy() for k, v in gen.arrays().items()}
    res = train_stage2(cfg.replace(epochs_polish=6, lr_polish=1e-3), gen, data)
    losses = res.log.column("L_pol")
    assert losses[-1] < losses[0]
    assert arrays_equal(before, gen.arrays())


def test_checkpoints_reproduce_polished_outputs(cfg, data, tmp_path):
    c = cfg.replace(epochs_polish=2, checkpoint_every=1)
    gen = train_stage1(c, data, checkpoint_dir=tmp_path).generator
    pol = train_stage2(c, gen, data, checkpoint_dir=tmp_path).polisher
    gen2, _ = load_checkpoint(tmp_path / "generator.ckpt", c.generator_config())
    pol2, header = load_checkpoint(tmp_path / "polisher.ckpt", c.polisher_config())
    assert header["epoch"] == 2
    a = method_outputs(c, data, gen, pol)
    b = method_outputs(c, data, gen2, pol2)
    assert arrays_equal(a, b)


def test_non_finite_loss_aborts_and_keeps_checkpoint(cfg, data, tmp_path):
    c = cfg.replace(epochs_polish=3, checkpoint_every=1)
    gen = train_stage1(cfg, data).generator

    def poison(epoch, pol):
        if epoch == 1:
            pol.params["conv_out.bias"].data = np.array([np.nan])

    with pytest.raises(TrainingAborted, match="epoch 2 batch 0"):
        train_stage2(c, gen, data, checkpoint_dir=tmp_path, on_epoch=poison)
    _, header = load_checkpoint(tmp_path / "polisher.ckpt")
    assert header["epoch"] == 1


def test_nan_data_aborts_stage1(cfg):
    d = prepare_data(cfg)
    d.hr[d.split.train[0], 3] = np.nan
    with pytest.raises(TrainingAborted, match="epoch 1"):
        train_stage1(cfg, d)


def test_pipeline_outputs_and_report(cfg, data):
    res = run_pipeline(cfg, data)
    n = len(data.split.test)
    assert set(res.outputs) == {"LERP", "CNN", "GAN-unpolished", "GAN-polished"}
    for arr in res.outputs.values():
        assert arr.shape == (n, 288) and arr.min() >= 0
    assert res.report.profile_ids == [data.ids[i] for i in data.split.test]
    assert all(g == 0 for g in res.report.gains["LERP"].values())
    assert set(res.report.wasserstein) == set(res.outputs)


def test_evaluate_self_comparison(data):
    truth = data.hr[data.split.test]
    lerp = method_outputs(RunConfig(**TINY), data)["LERP"]
    report = evaluate({"LERP": lerp, "GT": truth}, truth)
    assert all(v == 0 for v in report.means["GT"].values())
    assert all(report.gains["GT"][m] == 1.0 for m, v in report.means["LERP"].items() if v > 0)


def test_evaluate_rejects_missing_outputs(data):
    truth = data.hr[data.split.test]
    with pytest.raises(ValueError, match="no output"):
        evaluate({"LERP": truth, "CNN": None}, truth)
    with pytest.raises(ValueError, match="does not match"):
        evaluate({"LERP": truth[:, :100]}, truth)


def test_sweep_alpha_lengths(cfg):
    reports = sweep_alpha(cfg.replace(n_days=12), (3, 12))
    assert set(reports) == {3, 12}
    with pytest.raises(ValueError, match="cannot be split"):
        sweep_alpha(cfg, (5,))


def test_ablate_weather(cfg, data):
    report = ablate_weather(cfg, data)
    assert set(report.means) == {"LERP", "with-weather", "without-weather"}
    assert report.profile_ids == [data.ids[i] for i in data.split.test]


def test_weather_required_when_enabled(cfg):
    from loadsr.data import synthesize_corpus
    profiles, _ = synthesize_corpus(8, 0, 2)
    with pytest.raises(ValueError, match="weather"):
        prepare_data(cfg, profiles, None)
    assert prepare_data(cfg.replace(weather=False), profiles).weather is None


def test_train_log_csv(cfg, data, tmp_path):
    log = train_stage1(cfg, data).log
    log.to_csv(tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0].split(",") == list(log.columns) and len(lines) == 2
