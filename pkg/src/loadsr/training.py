"""Two-stage training, evaluation and experiment drivers."""
from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor, backward
from .baselines import lerp_array
from .data import (WEATHER_CHANNELS, LoadProfile, Normalizer, WeatherTrack, block_mean,
                   downsample, split_dataset, synthesize_corpus, weather_for_profile)
from .losses import (LossWeights, adversarial_loss, content_loss, discriminator_loss,
                     feature_matching_loss, generator_loss, polishing_terms)
from .metrics import MetricReport, build_report, evaluate_profiles, spectral_wasserstein
from .networks import (DiscriminatorConfig, GeneratorConfig, NetworkParams, PolisherConfig,
                       discriminator_forward, generator_forward, init_params, polisher_forward,
                       save_checkpoint, strides_for_alpha)
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

METHODS = ("LERP", "CNN", "GAN-unpolished", "GAN-polished")


DESK = {"epochs_gan": 30, "epochs_polish": 30, "gen_features": 32, "gen_res_blocks": 2,
        "pol_features": 16, "pol_res_blocks": 2}


@dataclass
class RunConfig:
    """Every knob of a training/evaluation run.

    Defaults follow the full-scale hyperparameters (300 + 300 epochs,
    64-feature generator); :meth:`desk` shrinks epochs and network widths so
    a 2000-day run finishes in minutes on one CPU core.
    """

    alpha: int = 6
    epochs_gan: int = 300
    epochs_polish: int = 300
    batch_size: int = 32
    lr: float = 1e-4
    lr_polish: float = 1e-4
    beta1: float = 0.99
    beta2: float = 0.999
    lambda_adv: float = 0.05
    lambda_feat: float = 0.5
    k_max: int = 3
    s_max: int = 1
    leaky_slope: float = 0.2
    noise_var: float = 0.01
    weather: bool = True
    seed: int = 0
    data_seed: int = 0
    n_days: int = 2000
    n_households: int = 20
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    gen_features: int = 64
    gen_res_blocks: int = 4
    pol_features: int = 32
    pol_res_blocks: int = 2
    d_steps: int = 1
    shuffle: bool = True
    grad_clip: float = 0.0
    checkpoint_every: int = 0
    spectral_k: int = 24
    data_path: str = ""
    weather_path: str = ""
    output_dir: str = "run"

    @classmethod
    def desk(cls, **overrides) -> "RunConfig":
        return cls(**{**DESK, **overrides})

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_adv, self.lambda_feat)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(weather_channels=len(WEATHER_CHANNELS) if self.weather else 0,
                               n_features=self.gen_features, n_res_blocks=self.gen_res_blocks,
                               strides=strides_for_alpha(self.alpha))

    def discriminator_config(self, length: int) -> DiscriminatorConfig:
        return DiscriminatorConfig(length=length, slope=self.leaky_slope)

    def polisher_config(self) -> PolisherConfig:
        return PolisherConfig(n_features=self.pol_features, n_res_blocks=self.pol_res_blocks)

    # flat key=value files
    def save(self, path) -> None:
        with open(path, "w") as f:
            for fld in dataclasses.fields(self):
                f.write(f"{fld.name}={getattr(self, fld.name)}\n")

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        values = {}
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, value = (s.strip() for s in line.split("=", 1))
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "RunConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kind = types[key]
            if not isinstance(value, str):
                kwargs[key] = value
            elif kind == "bool":
                if value.lower() not in ("true", "false", "1", "0", "yes", "no", "on", "off"):
                    raise ValueError(f"{key}: not a boolean: {value!r}")
                kwargs[key] = value.lower() in ("true", "1", "yes", "on")
            elif kind == "int":
                kwargs[key] = int(value)
            elif kind == "float":
                kwargs[key] = float(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


@dataclass
class TrainLog:
    """Per-epoch averages of the tracked training quantities."""

    columns: tuple[str, ...]
    rows: list[dict[str, float]] = field(default_factory=list)

    def append(self, row: dict[str, float]) -> None:
        bad = [k for k, v in row.items() if not np.isfinite(v)]
        if bad:
            raise TrainingAborted(f"non-finite logged values {bad} at epoch {row.get('epoch')}")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([repr(r[c]) for c in self.columns])


STAGE1_COLUMNS = ("epoch", "L_D", "L_G", "L_cont", "L_adv", "L_feat", "score_real", "score_fake")
CNN_COLUMNS = ("epoch", "L_G", "L_cont")
STAGE2_COLUMNS = ("epoch", "L_pol", "L_out", "L_swit")


class TrainingAborted(RuntimeError):
    pass


# -- data ----------------------------------------------------------------------

@dataclass
class PreparedData:
    """Paired HR/LR arrays (kW), LR-aligned weather, split and scaling."""

    hr: np.ndarray
    lr: np.ndarray
    weather: np.ndarray | None
    split: object
    normalizer: Normalizer
    ids: list[str]
    alpha: int

    @property
    def hr_length(self) -> int:
        return self.hr.shape[1]

    def arrays(self, which: str, weather: bool = True):
        """Normalized ``(lr, weather or None, hr)`` network inputs for a split."""
        idx = getattr(self.split, which)
        norm = self.normalizer
        lr = norm.normalize(self.lr[idx])[:, None, :]
        hr = norm.normalize(self.hr[idx])[:, None, :]
        w = None
        if weather and self.weather is not None:
            w = norm.normalize_weather(self.weather[idx])
        return lr, w, hr


def load_dataset(config: RunConfig) -> PreparedData:
    """Prepared data from ``config.data_path`` (CSV) or the synthetic corpus.

    CSV weather is matched to profiles by day; a CSV run without a weather
    file needs ``weather=False``.
    """
    if not config.data_path:
        return prepare_data(config)
    from .csvio import load_csv, load_weather_csv
    profiles = load_csv(config.data_path)
    weather = None
    if config.weather_path:
        by_day = load_weather_csv(config.weather_path)
        missing = sorted({p.day_id for p in profiles} - set(by_day))
        if missing:
            raise ValueError(f"no weather for days {missing[:5]}")
        weather = [by_day[p.day_id] for p in profiles]
    return prepare_data(config, profiles, weather)


def prepare_data(config: RunConfig, profiles: list[LoadProfile] | None = None,
                 weather: list[WeatherTrack] | None = None) -> PreparedData:
    """Pair HR profiles with noisy LR versions and LR-rate weather.

    Without ``profiles`` the synthetic corpus is generated from
    ``config.data_seed``.  Normalization statistics come from the training
    split only.
    """
    if profiles is None:
        profiles, weather = synthesize_corpus(config.n_days, config.data_seed, config.n_households)
    lengths = {len(p) for p in profiles}
    if len(lengths) != 1 or next(iter(lengths)) % config.alpha:
        raise ValueError(f"profile lengths {sorted(lengths)} must agree and be divisible by "
                         f"alpha={config.alpha}")
    if config.weather and weather is None:
        raise ValueError("weather input requested but no weather data available")
    rng = np.random.default_rng([config.data_seed, 1])
    hr = np.stack([p.values for p in profiles])
    lr = np.stack([downsample(p, config.alpha, config.noise_var, rng).values for p in profiles])
    w = None
    if weather is not None:
        period = profiles[0].period
        w = np.stack([block_mean(weather_for_profile(t, period, len(p)).as_array(), config.alpha)
                      for t, p in zip(weather, profiles)])
    split = split_dataset(len(profiles), (config.train_frac, config.val_frac, config.test_frac),
                          config.data_seed)
    normalizer = Normalizer.fit(hr[split.train], None if w is None else w[split.train])
    ids = [f"{p.household_id}/{p.day_id}" for p in profiles]
    return PreparedData(hr, lr, w, split, normalizer, ids, config.alpha)


# -- helpers -------------------------------------------------------------------

def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("generator", "discriminator", "batches", "polisher")
    kids = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(k) for n, k in zip(names, kids)}


def _batches(n: int, size: int, rng: np.random.Generator, shuffle: bool):
    order = rng.permutation(n) if shuffle else np.arange(n)
    return [order[i:i + size] for i in range(0, n, size)]


def _named_grads(net: NetworkParams, grads: dict) -> dict[str, np.ndarray]:
    return {k: grads[p] for k, p in net.params.items() if p in grads}


def _step(net: NetworkParams, grads: dict, state: AdamState, clip: float, where: str) -> None:
    named = _named_grads(net, grads)
    if clip > 0:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in named.values()))
        if norm > clip:
            named = {k: g * (clip / norm) for k, g in named.items()}
    try:
        adam_step(net.params, named, state)
    except FloatingPointError as e:
        raise TrainingAborted(f"{where}: {e}") from None


def _check(value: Tensor, where: str) -> float:
    v = float(value.data)
    if not np.isfinite(v):
        raise TrainingAborted(f"non-finite loss at {where}")
    return v


def _adam(config: RunConfig, lr: float | None = None) -> AdamState:
    return AdamState(lr=config.lr if lr is None else lr, beta1=config.beta1, beta2=config.beta2)


def generate(gen: NetworkParams, lr: np.ndarray, weather: np.ndarray | None,
             batch: int = 256) -> np.ndarray:
    """Eval-mode generator outputs, ``(n, 1, N)``."""
    outs = []
    for i in range(0, len(lr), batch):
        w = None if weather is None else Tensor(weather[i:i + batch])
        outs.append(generator_forward(Tensor(lr[i:i + batch]), w, gen, training=False).data)
    return np.concatenate(outs)


def polish(pol: NetworkParams, hr: np.ndarray, batch: int = 256) -> np.ndarray:
    return np.concatenate([polisher_forward(Tensor(hr[i:i + batch]), pol, training=False).data
                           for i in range(0, len(hr), batch)])


# -- stage 1 -------------------------------------------------------------------

@dataclass
class Stage1Result:
    generator: NetworkParams
    discriminator: NetworkParams | None
    log: TrainLog


def train_stage1(config: RunConfig, data: PreparedData, checkpoint_dir=None,
                 adversarial: bool = True) -> Stage1Result:
    """Alternate discriminator and generator updates on each batch.

    With ``adversarial=False`` only the generator is trained, on content
    loss alone; this is the CNN baseline.
    """
    rngs = _streams(config.seed)
    gen = init_params(config.generator_config(), rngs["generator"])
    lr_all, w_all, hr_all = data.arrays("train", config.weather)
    disc = None
    if adversarial:
        disc = init_params(config.discriminator_config(data.hr_length), rngs["discriminator"])
        d_state = _adam(config)
    g_state = _adam(config)
    weights = config.weights
    logbook = TrainLog(STAGE1_COLUMNS if adversarial else CNN_COLUMNS)

    for epoch in range(1, config.epochs_gan + 1):
        sums: dict[str, float] = {}
        batches = _batches(len(lr_all), config.batch_size, rngs["batches"], config.shuffle)
        for b, idx in enumerate(batches):
            where = f"epoch {epoch} batch {b}"
            real = Tensor(hr_all[idx])
            w = None if w_all is None else Tensor(w_all[idx])
            tape_g = Tape()
            with tape_g:
                fake = generator_forward(Tensor(lr_all[idx]), w, gen, training=True)
            vals = {}
            if adversarial:
                disc.set_trainable(True)
                for _ in range(config.d_steps):
                    with Tape() as tape_d:
                        s_real, _ = discriminator_forward(real, disc)
                        s_fake, _ = discriminator_forward(Tensor(fake.data), disc)
                        l_d = discriminator_loss(s_real, s_fake)
                    vals["L_D"] = _check(l_d, where)
                    _step(disc, backward(tape_d, l_d), d_state, config.grad_clip, where)
                vals["score_real"] = float(s_real.data.mean())
                vals["score_fake"] = float(s_fake.data.mean())
                disc.set_trainable(False)
                with tape_g:
                    s_gen, f_fake = discriminator_forward(fake, disc)
                    l_cont = content_loss(fake, real)
                    l_adv = adversarial_loss(s_gen)
                    _, f_real = discriminator_forward(real, disc)
                    l_feat = feature_matching_loss(f_fake, f_real)
                    l_g = generator_loss(l_cont, l_adv, l_feat, weights)
                vals["L_adv"] = _check(l_adv, where)
                vals["L_feat"] = _check(l_feat, where)
            else:
                with tape_g:
                    l_cont = content_loss(fake, real)
                    l_g = l_cont
            vals["L_cont"] = _check(l_cont, where)
            vals["L_G"] = _check(l_g, where)
            _step(gen, backward(tape_g, l_g), g_state, config.grad_clip, where)
            for k, v in vals.items():
                sums[k] = sums.get(k, 0.0) + v
        row = {"epoch": float(epoch), **{k: v / len(batches) for k, v in sums.items()}}
        logbook.append(row)
        log.info("stage1 %s", row)
        if checkpoint_dir and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            _save_stage1(checkpoint_dir, gen, disc, config.alpha, epoch, adversarial)
    return Stage1Result(gen, disc, logbook)


def _save_stage1(directory, gen, disc, alpha, epoch, adversarial=True):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = "generator" if adversarial else "cnn"
    save_checkpoint(gen, directory / f"{name}.ckpt", alpha, epoch)
    if disc is not None:
        save_checkpoint(disc, directory / "discriminator.ckpt", alpha, epoch)


def train_cnn(config: RunConfig, data: PreparedData, checkpoint_dir=None) -> Stage1Result:
    """MSE-only baseline with the generator's architecture."""
    return train_stage1(config, data, checkpoint_dir, adversarial=False)


# -- stage 2 -------------------------------------------------------------------

@dataclass
class Stage2Result:
    polisher: NetworkParams
    log: TrainLog


def init_polisher(config: RunConfig, rng: np.random.Generator) -> NetworkParams:
    """Polisher with a zeroed output conv, so it starts as the identity."""
    pol = init_params(config.polisher_config(), rng)
    pol.params["conv_out.weight"].data = np.zeros_like(pol.params["conv_out.weight"].data)
    return pol


def train_stage2(config: RunConfig, generator: NetworkParams, data: PreparedData,
                 checkpoint_dir=None, on_epoch=None) -> Stage2Result:
    """Fit the polisher to map frozen generator outputs onto the true HR profiles.

    ``on_epoch(epoch, polisher)`` is called after every epoch, e.g. for
    validation monitoring; it must not modify the polisher.
    """
    rngs = _streams(config.seed)
    pol = init_polisher(config, rngs["polisher"])
    lr_all, w_all, hr_all = data.arrays("train", config.weather)
    before = generator.copy()
    gen_hr = generate(generator, lr_all, w_all)
    state = _adam(config, config.lr_polish)
    batch_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(5)[4])
    logbook = TrainLog(STAGE2_COLUMNS)
    for epoch in range(1, config.epochs_polish + 1):
        sums = np.zeros(3)
        batches = _batches(len(gen_hr), config.batch_size, batch_rng, config.shuffle)
        for b, idx in enumerate(batches):
            where = f"polish epoch {epoch} batch {b}"
            with Tape() as tape:
                out = polisher_forward(Tensor(gen_hr[idx]), pol, training=True)
                total, l_out, l_swit = polishing_terms(out, Tensor(hr_all[idx]), config.k_max,
                                                       config.s_max)
            sums += [_check(total, where), float(l_out.data), float(l_swit.data)]
            _step(pol, backward(tape, total), state, config.grad_clip, where)
        avg = [float(v) / len(batches) for v in sums]
        logbook.append({"epoch": float(epoch), "L_pol": avg[0], "L_out": avg[1], "L_swit": avg[2]})
        if on_epoch is not None:
            on_epoch(epoch, pol)
        if checkpoint_dir and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
            save_checkpoint(pol, Path(checkpoint_dir) / "polisher.ckpt", config.alpha, epoch)
    for name, arr in before.arrays().items():
        if not np.array_equal(arr, generator.arrays()[name]):
            raise RuntimeError(f"stage 2 modified generator parameter {name}")
    return Stage2Result(pol, logbook)


# -- evaluation ----------------------------------------------------------------

def method_outputs(config: RunConfig, data: PreparedData, generator: NetworkParams | None = None,
                   polisher: NetworkParams | None = None, cnn: NetworkParams | None = None,
                   which: str = "test") -> dict[str, np.ndarray]:
    """HR reconstructions (kW, clamped at zero) for every available method."""
    idx = getattr(data.split, which)
    lr, w, _ = data.arrays(which, config.weather)
    norm = data.normalizer
    out = {"LERP": lerp_array(data.lr[idx], data.alpha)}
    if cnn is not None:
        cw = w if cnn.config.weather_channels else None
        out["CNN"] = generate(cnn, lr, cw)[:, 0]
    if generator is not None:
        raw = generate(generator, lr, w)
        out["GAN-unpolished"] = raw[:, 0]
        if polisher is not None:
            out["GAN-polished"] = polish(polisher, raw)[:, 0]
    return {k: np.maximum(norm.denormalize(v) if k != "LERP" else v, 0.0) for k, v in out.items()}


def evaluate(outputs: dict[str, np.ndarray], truth: np.ndarray, profile_ids=None,
             spectral_k: int = 24, baseline: str = "LERP") -> MetricReport:
    """Score every method against ``truth`` on the same profiles."""
    if not outputs:
        raise ValueError("no method outputs to evaluate")
    for name, arr in outputs.items():
        if arr is None:
            raise ValueError(f"method {name!r} produced no output")
        if arr.shape != truth.shape:
            raise ValueError(f"method {name!r} output {arr.shape} does not match truth {truth.shape}")
    per_method = {name: evaluate_profiles(arr, truth) for name, arr in outputs.items()}
    wd = {name: spectral_wasserstein(arr, truth, spectral_k) for name, arr in outputs.items()}
    return build_report(per_method, baseline, profile_ids, wd)


@dataclass
class PipelineResult:
    config: RunConfig
    data: PreparedData
    stage1: Stage1Result
    stage2: Stage2Result
    cnn: Stage1Result | None
    outputs: dict[str, np.ndarray]
    report: MetricReport


def run_pipeline(config: RunConfig, data: PreparedData | None = None,
                 include_cnn: bool = True) -> PipelineResult:
    """Train CNN baseline, GAN and polisher, then evaluate on the test split."""
    data = data or prepare_data(config)
    cnn = train_cnn(config, data) if include_cnn else None
    s1 = train_stage1(config, data)
    s2 = train_stage2(config, s1.generator, data)
    outputs = method_outputs(config, data, s1.generator, s2.polisher,
                             None if cnn is None else cnn.generator)
    test = data.split.test
    report = evaluate(outputs, data.hr[test], [data.ids[i] for i in test], config.spectral_k)
    return PipelineResult(config, data, s1, s2, cnn, outputs, report)


def sweep_alpha(config: RunConfig, alphas=(3, 6, 12)) -> dict[int, MetricReport]:
    """Repeat the pipeline per scale-up factor; only the upsampling strides change."""
    for a in alphas:
        strides_for_alpha(a)
    reports = {}
    for a in alphas:
        cfg = config.replace(alpha=a)
        reports[a] = run_pipeline(cfg).report
    return reports


def merged_sweep_rows(reports: dict[int, MetricReport]):
    for a, rep in reports.items():
        for method, metric, value, g in rep.rows():
            yield a, method, metric, value, g


def ablate_weather(config: RunConfig, data: PreparedData | None = None) -> MetricReport:
    """Train the same model with and without weather input on the same data."""
    data = data or prepare_data(config.replace(weather=True))
    outputs = {}
    for flag, name in ((True, "with-weather"), (False, "without-weather")):
        res = run_pipeline(config.replace(weather=flag), data, include_cnn=False)
        outputs.setdefault("LERP", res.outputs["LERP"])
        outputs[name] = res.outputs["GAN-polished"]
    test = data.split.test
    return evaluate(outputs, data.hr[test], [data.ids[i] for i in test], config.spectral_k)
