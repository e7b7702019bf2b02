import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from loadsr.baselines import lerp_array
from loadsr.data import (EventAppliance, LoadProfile, Normalizer, SynthSpec, Thermostatic,
                         WeatherTrack, block_mean, downsample, flag_abnormal, interpolate_weather,
                         split_dataset, synthesize_corpus, synthesize_profile, weather_for_profile)


def profile(values, period=None):
    values = np.asarray(values, dtype=float)
    return LoadProfile(values, period or 1440 // len(values))


def test_downsample_block_means():
    hr = LoadProfile(np.tile([1.0, 2, 3, 4, 5, 6], 40), 6)
    lr = downsample(hr, 3)
    np.testing.assert_array_equal(lr.values[:2], [2.0, 5.0])
    assert lr.period == 18


def test_downsample_288_to_48():
    lr = downsample(profile(np.ones(288)), 6)
    assert len(lr) == 48 and lr.period == 30


@pytest.mark.parametrize("alpha", [2, 3, 6, 12])
def test_downsample_constant(alpha):
    np.testing.assert_array_equal(downsample(profile(np.full(288, 2.5)), alpha).values, 2.5)


def test_downsample_rejects_non_divisor():
    with pytest.raises(ValueError, match="divide"):
        downsample(profile(np.ones(288)), 7)


def test_downsample_noise_is_clamped_and_seeded():
    hr = profile(np.full(288, 0.01))
    a = downsample(hr, 6, 1.0, np.random.default_rng(0))
    b = downsample(hr, 6, 1.0, np.random.default_rng(0))
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values.min() == 0.0 and a.values.max() > 0.01


def test_downsample_noise_variance():
    hr = profile(np.full(288, 50.0))
    rng = np.random.default_rng(1)
    resid = np.concatenate([downsample(hr, 6, 0.01, rng).values - 50.0 for _ in range(500)])
    assert abs(resid.mean()) < 0.003 and abs(resid.var() - 0.01) < 0.001


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 288, elements=st.floats(0, 100)),
       arrays(np.float64, 288, elements=st.floats(0, 100)),
       st.floats(0, 10), st.floats(0, 10), st.sampled_from([2, 3, 6, 12]))
def test_downsample_linear_and_energy_preserving(p, q, a, b, alpha):
    d = lambda x: downsample(profile(x), alpha).values
    combo = d(a * p + b * q)
    np.testing.assert_allclose(combo, a * d(p) + b * d(q), rtol=1e-12, atol=1e-12)
    assert abs(d(p).mean() - p.mean()) <= 1e-12 * max(1.0, p.mean())


def test_lerp_round_trip_constant_and_ramp_interior():
    lr = np.full(48, 1.7)
    np.testing.assert_allclose(block_mean(lerp_array(lr, 6), 6), lr, rtol=1e-14)
    ramp = 0.5 + 0.1 * np.arange(48)
    back = block_mean(lerp_array(ramp, 6), 6)
    # held-flat ends break linearity only in the first and last block
    np.testing.assert_allclose(back[1:-1], ramp[1:-1], rtol=1e-13)


def test_load_profile_invariants():
    with pytest.raises(ValueError, match="negative"):
        profile(-np.ones(288))
    with pytest.raises(ValueError, match="span a day"):
        LoadProfile(np.ones(100), 5)


def test_zero_power_spec_is_constant():
    spec = SynthSpec(base_kw=0.7, thermostat=Thermostatic(power=0.0),
                     events=[EventAppliance(0.0, 3.0, 30)])
    p, _ = synthesize_profile(spec, np.random.default_rng(0))
    np.testing.assert_allclose(p.values, 0.7)


def test_synthesis_is_seeded():
    a, wa = synthesize_profile(SynthSpec(seed=4))
    b, wb = synthesize_profile(SynthSpec(seed=4))
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(wa.as_array(), wb.as_array())
    assert len(a) == 288 and len(wa) == 25


def test_spec_rejects_negative_power():
    with pytest.raises(ValueError):
        SynthSpec(base_kw=-1.0)


def expected_mean_power(spec):
    """Closed-form expectation: base + thermostat power x mean duty + event energy rate."""
    th = spec.thermostat
    temps = np.linspace(spec.temp_low, spec.temp_high, 2001)[:, None] + \
        spec.temp_swing * np.sin(np.linspace(0, 2 * np.pi, 1441)[None, :-1])
    duty = np.clip(th.duty_ref + th.duty_slope * (temps - th.temp_ref), 0, 1).mean()
    events = sum(e.power * e.rate * e.duration_min / 1440 for e in spec.events)
    return spec.base_kw + th.power * duty + events


def test_mean_power_matches_expectation():
    spec = SynthSpec()
    rng = np.random.default_rng(0)
    mean = np.mean([synthesize_profile(spec, rng)[0].values.mean() for _ in range(1000)])
    expected = expected_mean_power(spec)
    assert abs(mean - expected) / expected < 0.10


def test_profiles_have_sub_interval_steps():
    p, _ = synthesize_profile(SynthSpec(seed=1))
    within = p.values.reshape(48, 6)
    assert np.any(within.max(axis=1) - within.min(axis=1) > 0.5)


def test_corpus_shares_daily_weather():
    profiles, weather = synthesize_corpus(6, seed=0, n_households=3)
    assert [p.day_id for p in profiles] == [0, 0, 0, 1, 1, 1]
    assert weather[0] is weather[2] and weather[3] is not weather[0]
    assert all(p.values.min() >= 0 and len(p) == 288 for p in profiles)


def test_interpolate_weather_examples():
    t = WeatherTrack({"temperature": [0.0, 60.0]}, 60)
    np.testing.assert_array_equal(interpolate_weather(t, 30).channels["temperature"], [0, 30, 60])
    c = WeatherTrack({"humidity": np.full(25, 40.0)}, 60)
    np.testing.assert_array_equal(interpolate_weather(c, 5).channels["humidity"], 40.0)


def test_interpolation_passes_through_knots_and_keeps_flags():
    rng = np.random.default_rng(0)
    knots = rng.normal(size=25)
    flag = (np.arange(25) >= 7).astype(float)
    fine = interpolate_weather(WeatherTrack({"temperature": knots, "daylight": flag}, 60), 5)
    np.testing.assert_array_equal(fine.channels["temperature"][::12], knots)
    assert set(np.unique(fine.channels["daylight"])) <= {0.0, 1.0}
    assert len(fine) == 24 * 12 + 1


def test_interpolate_weather_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        interpolate_weather(WeatherTrack({"temperature": []}, 60), 5)


def test_weather_for_profile_length():
    w = weather_for_profile(synthesize_profile(SynthSpec())[1], 5, 288)
    assert len(w) == 288 and w.period == 5


def test_split_sizes_and_partition():
    s = split_dataset(100, seed=3)
    assert (len(s.train), len(s.val), len(s.test)) == (70, 15, 15)
    allidx = np.concatenate([s.train, s.val, s.test])
    assert sorted(allidx) == list(range(100))
    t = split_dataset(100, seed=3)
    assert np.array_equal(s.train, t.train) and np.array_equal(s.test, t.test)


def test_split_rejects_bad_fractions():
    with pytest.raises(ValueError):
        split_dataset(10, (0.5, 0.2, 0.2))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 500), st.integers(0, 1000))
def test_split_is_partition(n, seed):
    s = split_dataset(n, seed=seed)
    parts = [set(s.train), set(s.val), set(s.test)]
    assert set.union(*parts) == set(range(n))
    assert sum(map(len, parts)) == n


def test_normalizer_round_trip_and_train_stats():
    rng = np.random.default_rng(0)
    train = rng.gamma(2.0, 1.0, size=(50, 288))
    test = rng.gamma(2.0, 1.0, size=(10, 288))
    norm = Normalizer.fit(train)
    z = norm.normalize(train)
    assert abs(z.mean()) < 1e-9 and abs(z.std() - 1) < 1e-9
    np.testing.assert_allclose(norm.denormalize(norm.normalize(test)), test, atol=1e-12)
    # held-out data is scaled with the training statistics, not its own
    np.testing.assert_allclose(norm.normalize(test), (test - train.mean()) / train.std())


def test_normalizer_floors_zero_std():
    norm = Normalizer.fit(np.full((3, 4), 2.0), np.ones((3, 2, 4)))
    assert norm.load_std == 1e-8 and np.all(norm.weather_std == 1e-8)
    back = Normalizer.from_dict(norm.to_dict())
    assert back.load_std == norm.load_std
    np.testing.assert_array_equal(back.weather_std, norm.weather_std)


def test_flag_abnormal():
    days = [profile(np.full(288, 1.0)) for _ in range(9)] + [profile(np.full(288, 20.0))]
    assert flag_abnormal(days) == [9]
