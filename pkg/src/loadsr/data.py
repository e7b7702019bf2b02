"""Load profiles, weather tracks, the synthetic household generator, and
dataset preparation (downsampling, splitting, normalization)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MINUTES_PER_DAY = 1440
WEATHER_CHANNELS = ("temperature", "humidity", "wind_speed", "visibility", "daylight")


@dataclass
class LoadProfile:
    """One household-day of power readings in kW."""

    values: np.ndarray
    period: int
    day_id: int = 0
    household_id: str = "h0"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"profile values must be 1-D, got shape {self.values.shape}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError(f"profile {self.household_id}/{self.day_id} has negative "
                             "or non-finite readings")
        if len(self.values) * self.period != MINUTES_PER_DAY:
            raise ValueError(f"{len(self.values)} samples at {self.period} min do not span a day")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class WeatherTrack:
    """Named exogenous series sampled every ``period`` minutes."""

    channels: dict[str, np.ndarray]
    period: int

    def __post_init__(self):
        self.channels = {k: np.asarray(v, dtype=np.float64) for k, v in self.channels.items()}
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise ValueError(f"weather channels differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def as_array(self, names=WEATHER_CHANNELS) -> np.ndarray:
        return np.stack([self.channels[n] for n in names])


# -- downsampling ------------------------------------------------------------

def block_mean(x: np.ndarray, alpha: int) -> np.ndarray:
    """Mean of each run of ``alpha`` consecutive samples along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if alpha < 1 or x.shape[-1] % alpha:
        raise ValueError(f"alpha={alpha} does not divide length {x.shape[-1]}")
    return x.reshape(*x.shape[:-1], x.shape[-1] // alpha, alpha).mean(axis=-1)


def downsample(hr: LoadProfile, alpha: int, noise_var: float = 0.0,
               rng: np.random.Generator | None = None) -> LoadProfile:
    """Interval-average ``alpha`` HR samples per LR sample and add Gaussian noise.

    Noisy means are clamped at zero so the result stays a valid profile.
    """
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    lr = block_mean(hr.values, alpha)
    if noise_var > 0:
        if rng is None:
            raise ValueError("noise_var > 0 needs an rng")
        lr = np.maximum(lr + rng.normal(0.0, np.sqrt(noise_var), lr.shape), 0.0)
    return LoadProfile(lr, hr.period * alpha, hr.day_id, hr.household_id)


# -- synthetic households ----------------------------------------------------

@dataclass
class Thermostatic:
    """Cycling appliance whose on-fraction rises linearly with temperature."""

    power: float = 3.0
    duty_ref: float = 0.4
    duty_slope: float = 0.025
    temp_ref: float = 26.0
    cycle_min: int = 20

    def duty(self, temp):
        return np.clip(self.duty_ref + self.duty_slope * (np.asarray(temp) - self.temp_ref), 0.0, 1.0)


@dataclass
class EventAppliance:
    """Rectangular pulses: Poisson count per day, uniform start minute."""

    power: float
    rate: float
    duration_min: int


def _default_events():
    return [EventAppliance(1.8, 1.5, 45), EventAppliance(1.2, 3.0, 6), EventAppliance(4.5, 0.4, 90)]


@dataclass
class SynthSpec:
    base_kw: float = 0.4
    thermostat: Thermostatic = field(default_factory=Thermostatic)
    events: list[EventAppliance] = field(default_factory=_default_events)
    temp_low: float = 22.0
    temp_high: float = 30.0
    temp_swing: float = 6.0
    seed: int = 0

    def __post_init__(self):
        powers = [self.base_kw, self.thermostat.power] + [e.power for e in self.events]
        if min(powers) < 0 or any(e.rate < 0 for e in self.events):
            raise ValueError("appliance powers and event rates must be nonnegative")


def diurnal_temperature(day_mean: float, swing: float, minutes: np.ndarray) -> np.ndarray:
    """Sinusoid peaking at 15:00 around the day's mean."""
    return day_mean + swing * np.sin(2 * np.pi * (minutes - 540.0) / MINUTES_PER_DAY)


def synthesize_weather(rng: np.random.Generator, day_mean: float, swing: float) -> WeatherTrack:
    """Hourly weather knots, midnight to midnight inclusive (25 samples)."""
    hours = np.arange(25) * 60.0
    t_hourly = diurnal_temperature(day_mean, swing, hours)
    sunrise = 390 + rng.normal(0, 10)
    sunset = 1170 + rng.normal(0, 10)
    return WeatherTrack({
        "temperature": t_hourly,
        "humidity": np.clip(75 - 2.0 * (t_hourly - 22) + rng.normal(0, 3, 25), 5, 100),
        "wind_speed": np.abs(rng.normal(3.5, 1.5, 25)),
        "visibility": np.clip(10 - np.abs(rng.normal(0, 1.0, 25)), 0, 10),
        "daylight": ((hours >= sunrise) & (hours < sunset)).astype(float),
    }, period=60)


def _minute_load(spec: SynthSpec, rng: np.random.Generator, day_mean: float) -> np.ndarray:
    minutes = np.arange(MINUTES_PER_DAY)
    load = np.full(MINUTES_PER_DAY, spec.base_kw)

    th = spec.thermostat
    offset = int(rng.integers(th.cycle_min))
    temp = diurnal_temperature(day_mean, spec.temp_swing, minutes)
    for start in range(offset - th.cycle_min, MINUTES_PER_DAY, th.cycle_min):
        on = int(round(float(th.duty(temp[max(start, 0)])) * th.cycle_min))
        lo, hi = max(start, 0), min(start + on, MINUTES_PER_DAY)
        if hi > lo:
            load[lo:hi] += th.power

    for ev in spec.events:
        for start in rng.integers(0, MINUTES_PER_DAY, rng.poisson(ev.rate)):
            load[start:start + ev.duration_min] += ev.power
    return load


def synthesize_profile(spec: SynthSpec, rng: np.random.Generator | None = None,
                       day_id: int = 0, household_id: str = "h0",
                       period: int = 5) -> tuple[LoadProfile, WeatherTrack]:
    """One synthetic household-day and its hourly weather.

    The load is built minute by minute (base + thermostatic square wave +
    Poisson events) and interval-averaged to ``period``.  The day's mean
    temperature is uniform on ``[temp_low, temp_high]``.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    day_mean = rng.uniform(spec.temp_low, spec.temp_high)
    load = _minute_load(spec, rng, day_mean)
    weather = synthesize_weather(rng, day_mean, spec.temp_swing)
    return LoadProfile(block_mean(load, period), period, day_id, household_id), weather


def household_specs(n_households: int, rng: np.random.Generator) -> list[SynthSpec]:
    """Randomized appliance inventories for a synthetic neighborhood."""
    specs = []
    for _ in range(n_households):
        th = Thermostatic(power=rng.uniform(2.0, 4.0), duty_ref=rng.uniform(0.3, 0.5),
                          duty_slope=rng.uniform(0.015, 0.03), temp_ref=26.0,
                          cycle_min=int(rng.choice([15, 20, 25])))
        events = [EventAppliance(rng.uniform(1.2, 2.5), rng.uniform(0.5, 2.0), 45),
                  EventAppliance(rng.uniform(0.8, 1.5), rng.uniform(1.0, 4.0), 6),
                  EventAppliance(rng.uniform(3.0, 6.0), rng.uniform(0.0, 0.7), 90)]
        specs.append(SynthSpec(base_kw=rng.uniform(0.2, 0.8), thermostat=th, events=events))
    return specs


def synthesize_corpus(n_days: int, seed: int = 0, n_households: int = 20,
                      period: int = 5) -> tuple[list[LoadProfile], list[WeatherTrack]]:
    """``n_days`` household-days: calendar day ``i // n_households`` for
    household ``i % n_households``.  Households share each day's weather."""
    rng = np.random.default_rng(seed)
    specs = household_specs(n_households, rng)
    profiles, weather = [], []
    for i in range(n_days):
        h, day = i % n_households, i // n_households
        if h == 0:
            day_mean = rng.uniform(specs[0].temp_low, specs[0].temp_high)
            track = synthesize_weather(rng, day_mean, specs[0].temp_swing)
        load = _minute_load(specs[h], rng, day_mean)
        profiles.append(LoadProfile(block_mean(load, period), period, day, f"h{h:03d}"))
        weather.append(track)
    return profiles, weather


# -- weather alignment ---------------------------------------------------------

def interpolate_weather(track: WeatherTrack, target_period: int) -> WeatherTrack:
    """Resample every channel onto a finer grid that keeps the original knots.

    Continuous channels are linearly interpolated; ``daylight`` is a flag and
    is taken from the nearest knot instead.
    """
    n = len(track)
    if n == 0 or any(len(v) == 0 for v in track.channels.values()):
        raise ValueError("cannot interpolate an empty weather channel")
    if n < 2:
        raise ValueError("need at least two knots to interpolate")
    if track.period % target_period:
        raise ValueError(f"target period {target_period} must divide {track.period}")
    ratio = track.period // target_period
    knots = np.arange(n) * ratio
    grid = np.arange((n - 1) * ratio + 1)
    out = {}
    for name, v in track.channels.items():
        if name == "daylight":
            nearest = np.clip(np.floor(grid / ratio + 0.5).astype(int), 0, n - 1)
            out[name] = v[nearest]
        else:
            out[name] = np.interp(grid, knots, v)
    return WeatherTrack(out, target_period)


def weather_for_profile(track: WeatherTrack, profile_period: int, length: int) -> WeatherTrack:
    """Interpolate to the profile period and keep the first ``length`` samples."""
    fine = track if track.period == profile_period else interpolate_weather(track, profile_period)
    if len(fine) < length:
        raise ValueError(f"weather covers {len(fine)} samples, profile needs {length}")
    return WeatherTrack({k: v[:length] for k, v in fine.channels.items()}, profile_period)


# -- splitting and scaling ---------------------------------------------------

@dataclass
class DatasetSplit:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    fractions: tuple[float, float, float]


def split_dataset(n_items: int, fractions=(0.70, 0.15, 0.15), seed: int = 0) -> DatasetSplit:
    """Shuffle day indices and cut them into train/val/test."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three nonnegatives summing to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(n_items)
    n_train = int(round(fractions[0] * n_items))
    n_val = int(round(fractions[1] * n_items))
    n_val = min(n_val, n_items - n_train)
    return DatasetSplit(np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_val]),
                        np.sort(order[n_train + n_val:]), fractions)


STD_FLOOR = 1e-8


@dataclass
class Normalizer:
    """Z-score scaling with statistics fitted on the training split only.

    Load uses one corpus-wide mean/std; weather uses one pair per channel.
    """

    load_mean: float
    load_std: float
    weather_mean: np.ndarray | None = None
    weather_std: np.ndarray | None = None

    @classmethod
    def fit(cls, train_loads: np.ndarray, train_weather: np.ndarray | None = None) -> "Normalizer":
        train_loads = np.asarray(train_loads, dtype=np.float64)
        wm = ws = None
        if train_weather is not None:
            # (items, channels, length)
            wm = train_weather.mean(axis=(0, 2))
            ws = np.maximum(train_weather.std(axis=(0, 2)), STD_FLOOR)
        return cls(float(train_loads.mean()), max(float(train_loads.std()), STD_FLOOR), wm, ws)

    def normalize(self, loads):
        return (np.asarray(loads, dtype=np.float64) - self.load_mean) / self.load_std

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.load_std + self.load_mean

    def normalize_weather(self, w):
        return (w - self.weather_mean[None, :, None]) / self.weather_std[None, :, None]

    def to_dict(self) -> dict:
        d = {"load_mean": self.load_mean, "load_std": self.load_std}
        if self.weather_mean is not None:
            d["weather_mean"] = self.weather_mean.tolist()
            d["weather_std"] = self.weather_std.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        wm = d.get("weather_mean")
        ws = d.get("weather_std")
        return cls(d["load_mean"], d["load_std"],
                   None if wm is None else np.array(wm), None if ws is None else np.array(ws))


def flag_abnormal(profiles: list[LoadProfile], multiple: float = 10.0) -> list[int]:
    """Indices of days whose peak exceeds ``multiple`` x the corpus median peak."""
    peaks = np.array([p.values.max() for p in profiles])
    return [int(i) for i in np.flatnonzero(peaks > multiple * np.median(peaks))]
