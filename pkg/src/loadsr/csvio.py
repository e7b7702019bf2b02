"""CSV exchange format for load profiles and weather tracks.

Profiles: header ``household_id,day,period_min,t0,t1,...``, one row per
household-day.  Weather: ``day,period_min,channel,v0,v1,...``, one row per
day and channel.  Values are written with ``repr`` so reading back is exact.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import MINUTES_PER_DAY, LoadProfile, WeatherTrack, block_mean

PROFILE_COLUMNS = ("household_id", "day", "period_min")
WEATHER_COLUMNS = ("day", "period_min", "channel")


class CSVFormatError(ValueError):
    """Malformed input file; the message names the offending row."""


def save_csv(profiles: list[LoadProfile], path) -> None:
    width = max(len(p) for p in profiles)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(PROFILE_COLUMNS) + [f"t{i}" for i in range(width)])
        for p in profiles:
            w.writerow([p.household_id, p.day_id, p.period] + [repr(float(v)) for v in p.values])


def _read_rows(path, required):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise CSVFormatError(f"{path}: empty file")
        missing = [c for c in required if c not in header]
        if missing:
            raise CSVFormatError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            if row:
                yield lineno, header, row


def _values(row, start, expected, path, lineno):
    cells = row[start:]
    while len(cells) > expected and cells[-1] == "":
        cells = cells[:-1]
    if len(cells) < expected:
        raise CSVFormatError(f"{path}: row {lineno}: gap, only {len(cells)} of {expected} "
                             "intervals present")
    for i, c in enumerate(cells):
        if c.strip() == "":
            raise CSVFormatError(f"{path}: row {lineno}: gap at interval t{i}")
    try:
        return np.array([float(c) for c in cells])
    except ValueError as e:
        raise CSVFormatError(f"{path}: row {lineno}: {e}") from None


def load_csv(path, target_period: int | None = None) -> list[LoadProfile]:
    """Read profiles, optionally block-averaging each row to ``target_period``.

    Rows must be strictly increasing in ``day`` per household and carry one
    value per interval of the day.
    """
    path = Path(path)
    profiles = []
    last_day: dict[str, int] = {}
    for lineno, header, row in _read_rows(path, PROFILE_COLUMNS):
        hid = row[header.index("household_id")]
        try:
            day = int(row[header.index("day")])
            period = int(row[header.index("period_min")])
        except ValueError as e:
            raise CSVFormatError(f"{path}: row {lineno}: {e}") from None
        if period < 1 or MINUTES_PER_DAY % period:
            raise CSVFormatError(f"{path}: row {lineno}: period {period} does not divide a day")
        if hid in last_day and day <= last_day[hid]:
            raise CSVFormatError(f"{path}: row {lineno}: day {day} of household {hid} is not "
                                 f"after day {last_day[hid]}")
        last_day[hid] = day
        values = _values(row, len(PROFILE_COLUMNS), MINUTES_PER_DAY // period, path, lineno)
        if target_period is not None and target_period != period:
            if target_period % period:
                raise CSVFormatError(f"{path}: row {lineno}: cannot average {period}-min data "
                                     f"to {target_period} min")
            values = block_mean(values, target_period // period)
            period = target_period
        try:
            profiles.append(LoadProfile(values, period, day, hid))
        except ValueError as e:
            raise CSVFormatError(f"{path}: row {lineno}: {e}") from None
    return profiles


def save_weather_csv(tracks: dict[int, WeatherTrack], path) -> None:
    width = max(len(t) for t in tracks.values())
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(WEATHER_COLUMNS) + [f"v{i}" for i in range(width)])
        for day, track in tracks.items():
            for name, v in track.channels.items():
                w.writerow([day, track.period, name] + [repr(float(x)) for x in v])


def load_weather_csv(path) -> dict[int, WeatherTrack]:
    path = Path(path)
    chans: dict[int, dict[str, np.ndarray]] = {}
    periods: dict[int, int] = {}
    lengths: dict[int, int] = {}
    for lineno, header, row in _read_rows(path, WEATHER_COLUMNS):
        day = int(row[header.index("day")])
        period = int(row[header.index("period_min")])
        name = row[header.index("channel")]
        cells = row[len(WEATHER_COLUMNS):]
        while cells and cells[-1] == "":
            cells = cells[:-1]
        n = lengths.setdefault(day, len(cells))
        if periods.setdefault(day, period) != period:
            raise CSVFormatError(f"{path}: row {lineno}: mixed periods for day {day}")
        chans.setdefault(day, {})[name] = _values(row, len(WEATHER_COLUMNS), n, path, lineno)
    return {d: WeatherTrack(c, periods[d]) for d, c in chans.items()}
