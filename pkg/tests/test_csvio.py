import numpy as np
import pytest

from loadsr.csvio import CSVFormatError, load_csv, load_weather_csv, save_csv, save_weather_csv
from loadsr.data import LoadProfile, block_mean, downsample, synthesize_corpus


def test_round_trip(tmp_path):
    profiles, _ = synthesize_corpus(6, seed=2, n_households=2)
    save_csv(profiles, tmp_path / "p.csv")
    back = load_csv(tmp_path / "p.csv")
    assert [(p.household_id, p.day_id, p.period) for p in back] == \
        [(p.household_id, p.day_id, p.period) for p in profiles]
    for a, b in zip(profiles, back):
        np.testing.assert_allclose(a.values, b.values, atol=1e-9, rtol=0)


def test_weather_round_trip(tmp_path):
    profiles, weather = synthesize_corpus(4, seed=0, n_households=2)
    tracks = {p.day_id: w for p, w in zip(profiles, weather)}
    save_weather_csv(tracks, tmp_path / "w.csv")
    back = load_weather_csv(tmp_path / "w.csv")
    assert sorted(back) == [0, 1]
    np.testing.assert_array_equal(back[1].as_array(), tracks[1].as_array())


def test_header_and_schema(tmp_path):
    save_csv([LoadProfile(np.ones(48), 30, 3, "a")], tmp_path / "p.csv")
    header = (tmp_path / "p.csv").read_text().splitlines()[0].split(",")
    assert header[:4] == ["household_id", "day", "period_min", "t0"] and header[-1] == "t47"


def test_ingest_downsamples_minute_data(tmp_path):
    rng = np.random.default_rng(0)
    minute = LoadProfile(rng.gamma(2.0, 1.0, 1440), 1, 0, "m")
    save_csv([minute], tmp_path / "m.csv")
    five = load_csv(tmp_path / "m.csv", target_period=5)[0]
    assert five.period == 5
    np.testing.assert_allclose(five.values, downsample(minute, 5).values, rtol=1e-12)
    np.testing.assert_allclose(five.values, minute.values.reshape(288, 5).mean(axis=1), rtol=1e-12)


def write(path, text):
    path.write_text(text)
    return path


def test_missing_column(tmp_path):
    with pytest.raises(CSVFormatError, match="missing columns"):
        load_csv(write(tmp_path / "x.csv", "household_id,day,t0\nh,0,1\n"))


def test_gap_names_row(tmp_path):
    cells = ",".join(["1"] * 48)
    gap = ",".join(["1"] * 10 + [""] + ["1"] * 37)
    path = write(tmp_path / "x.csv", "household_id,day,period_min," +
                 ",".join(f"t{i}" for i in range(48)) + f"\nh,0,30,{cells}\nh,1,30,{gap}\n")
    with pytest.raises(CSVFormatError, match="row 3.*gap"):
        load_csv(path)


def test_short_row_is_gap(tmp_path):
    path = write(tmp_path / "x.csv", "household_id,day,period_min,t0\nh,0,30," +
                 ",".join(["1"] * 47) + "\n")
    with pytest.raises(CSVFormatError, match="row 2.*gap"):
        load_csv(path)


def test_non_monotonic_days(tmp_path):
    cells = ",".join(["1"] * 48)
    path = write(tmp_path / "x.csv", f"household_id,day,period_min\nh,2,30,{cells}\nh,1,30,{cells}\n")
    with pytest.raises(CSVFormatError, match="row 3"):
        load_csv(path)


def test_bad_period(tmp_path):
    path = write(tmp_path / "x.csv", "household_id,day,period_min\nh,0,7," + ",".join(["1"] * 5) + "\n")
    with pytest.raises(CSVFormatError, match="period"):
        load_csv(path)


def test_block_mean_oracle():
    x = np.arange(12.0)
    np.testing.assert_array_equal(block_mean(x, 4), [1.5, 5.5, 9.5])
