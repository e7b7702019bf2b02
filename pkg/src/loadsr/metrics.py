"""Point-wise and shape-wise comparison of generated and true profiles."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

METRICS = ("mse", "ple", "fce", "cpe")
RDP_EPS_FRACTION = 0.05


def _pair(a, b, what: str) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"{what}: length mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b, "mse")
    return float(np.mean((a - b) ** 2))


def ple(gen, true) -> float:
    """Peak load error: absolute difference of the two maxima."""
    gen, true = np.asarray(gen), np.asarray(true)
    if gen.size == 0 or true.size == 0:
        raise ValueError("ple of an empty profile")
    return float(abs(gen.max() - true.max()))


def naive_dft(x) -> np.ndarray:
    """O(N^2) forward DFT, ``X_k = sum_n x_n exp(-2 pi i k n / N)``."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def dft_amplitude(x, fast: bool = True) -> np.ndarray:
    """Magnitudes of the unnormalized forward DFT, all N bins."""
    x = np.asarray(x, dtype=np.float64)
    return np.abs(np.fft.fft(x, axis=-1) if fast else naive_dft(x))


def fce(gen, true) -> float:
    """Frequency component error: mean absolute gap between amplitude spectra."""
    gen, true = _pair(gen, true, "fce")
    return float(np.abs(dft_amplitude(gen) - dft_amplitude(true)).sum() / gen.shape[-1])


@dataclass
class Polyline:
    indices: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def interpolate(self, n: int) -> np.ndarray:
        return np.interp(np.arange(n), self.indices, self.values)


def _segment_distances(x: np.ndarray, y: np.ndarray, i: int, j: int) -> np.ndarray:
    """Perpendicular distance of points i+1..j-1 to the chord (i, j)."""
    dx, dy = x[j] - x[i], y[j] - y[i]
    px, py = x[i + 1:j] - x[i], y[i + 1:j] - y[i]
    return np.abs(dx * py - dy * px) / np.hypot(dx, dy)


def rdp_simplify(x, eps: float) -> Polyline:
    """Ramer-Douglas-Peucker simplification of ``(index, value)`` points.

    A point is kept when it is strictly farther than ``eps`` from the chord
    of its current segment; among equally far points the first wins.
    """
    y = np.asarray(x, dtype=np.float64)
    if y.ndim != 1 or len(y) < 2:
        raise ValueError("rdp_simplify needs a 1-D signal with at least two points")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    t = np.arange(len(y), dtype=np.float64)
    keep = np.zeros(len(y), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(y) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _segment_distances(t, y, i, j)
        m = int(np.argmax(d))
        if d[m] > eps:
            k = i + 1 + m
            keep[k] = True
            stack.append((k, j))
            stack.append((i, k))
    idx = np.flatnonzero(keep)
    return Polyline(idx, y[idx])


def default_rdp_eps(reference) -> float:
    reference = np.asarray(reference)
    return RDP_EPS_FRACTION * float(reference.max() - reference.min())


def cpe(gen, true, eps: float | None = None) -> float:
    """Critical point error: gap in RDP-retained point counts, over N.

    ``eps`` defaults to 5% of the true profile's range and is shared by
    both profiles.
    """
    gen, true = _pair(gen, true, "cpe")
    if eps is None:
        eps = default_rdp_eps(true)
    return abs(len(rdp_simplify(gen, eps)) - len(rdp_simplify(true, eps))) / len(true)


def wasserstein_1d(a, b) -> float:
    """W1 distance between two empirical distributions on the line.

    Equal sizes reduce to the mean gap of sorted samples; otherwise the two
    quantile functions are compared on their merged breakpoints.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein_1d of an empty sample set")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    qs = np.union1d(np.arange(a.size + 1) / a.size, np.arange(b.size + 1) / b.size)
    mids = 0.5 * (qs[:-1] + qs[1:])
    qa = a[np.minimum((mids * a.size).astype(int), a.size - 1)]
    qb = b[np.minimum((mids * b.size).astype(int), b.size - 1)]
    return float(np.sum(np.diff(qs) * np.abs(qa - qb)))


def spectral_features(profiles, k: int = 24) -> np.ndarray:
    """First ``k`` DFT amplitude bins of each profile, shape ``(n, k)``."""
    return dft_amplitude(np.asarray(profiles, dtype=np.float64))[:, :k]


def spectral_wasserstein(gen_profiles, true_profiles, k: int = 24) -> np.ndarray:
    """Per-bin W1 between the spectral feature distributions."""
    fg, ft = spectral_features(gen_profiles, k), spectral_features(true_profiles, k)
    return np.array([wasserstein_1d(fg[:, i], ft[:, i]) for i in range(fg.shape[1])])


def downsample_consistency(gen_hr, lr, alpha: int) -> float:
    """MSE between the block means of a generated profile and its LR input."""
    gen_hr = np.asarray(gen_hr, dtype=np.float64)
    blocks = gen_hr.reshape(*gen_hr.shape[:-1], -1, alpha).mean(axis=-1)
    return mse(blocks, lr)


def profile_metrics(gen, true, eps: float | None = None) -> dict[str, float]:
    return {"mse": mse(gen, true), "ple": ple(gen, true), "fce": fce(gen, true),
            "cpe": cpe(gen, true, eps)}


def evaluate_profiles(gen: np.ndarray, true: np.ndarray) -> dict[str, np.ndarray]:
    """Per-profile metric arrays for row-stacked ``(n, N)`` profiles."""
    gen, true = _pair(gen, true, "evaluate_profiles")
    rows = [profile_metrics(g, t) for g, t in zip(gen, true)]
    return {m: np.array([r[m] for r in rows]) for m in METRICS}


@dataclass
class MetricReport:
    """Per-profile values, means and gains relative to a baseline method.

    ``gain = (baseline - method) / baseline``, so positive is better.
    """

    per_profile: dict[str, dict[str, np.ndarray]]
    means: dict[str, dict[str, float]]
    gains: dict[str, dict[str, float]]
    baseline: str
    profile_ids: list
    wasserstein: dict[str, np.ndarray] = field(default_factory=dict)

    def rows(self):
        for method, ms in self.means.items():
            for metric, value in ms.items():
                yield method, metric, value, self.gains[method][metric]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["method", "metric", "mean", "gain_vs_lerp"])
            for method, metric, value, gain in self.rows():
                w.writerow([method, metric, repr(value), repr(gain)])

    def to_long_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["method", "metric", "profile", "value"])
            for method, ms in self.per_profile.items():
                for metric, values in ms.items():
                    for pid, v in zip(self.profile_ids, values):
                        w.writerow([method, metric, pid, repr(float(v))])

    def to_dict(self) -> dict:
        return {"baseline": self.baseline, "profile_ids": [str(p) for p in self.profile_ids],
                "means": self.means, "gains": self.gains,
                "per_profile": {m: {k: v.tolist() for k, v in d.items()}
                                for m, d in self.per_profile.items()},
                "wasserstein": {m: v.tolist() for m, v in self.wasserstein.items()}}

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls({m: {k: np.array(v) for k, v in dd.items()} for m, dd in d["per_profile"].items()},
                   d["means"], d["gains"], d["baseline"], d["profile_ids"],
                   {m: np.array(v) for m, v in d.get("wasserstein", {}).items()})

    def table(self, percent: bool = True) -> str:
        """Plain-text table with one mean row and one gain row per metric."""
        methods = list(self.means)
        metrics = list(next(iter(self.means.values())))
        width = max(12, *(len(m) + 2 for m in methods))
        lines = ["metric".ljust(14) + "".join(m.rjust(width) for m in methods)]
        for metric in metrics:
            lines.append(f"{metric.upper():<6}{'mean':<8}" + "".join(
                f"{self.means[m][metric]:.4f}".rjust(width) for m in methods))
            gains = []
            for m in methods:
                g = self.gains[m][metric]
                gains.append("/" if m == self.baseline else
                             (f"{round(100 * g):d}%" if percent else f"{g:.4f}"))
            lines.append(f"{'':<6}{'gain':<8}" + "".join(s.rjust(width) for s in gains))
        return "\n".join(lines)


def gain(baseline: float, value: float) -> float:
    if baseline == 0:
        return 0.0 if value == 0 else float("-inf")
    return (baseline - value) / baseline


def build_report(per_method: dict[str, dict[str, np.ndarray]], baseline: str = "LERP",
                 profile_ids=None, wasserstein: dict | None = None) -> MetricReport:
    """Aggregate per-profile metric arrays into means and baseline gains.

    Every method must carry arrays of the same length (same test set).
    """
    if baseline not in per_method:
        raise ValueError(f"baseline {baseline!r} missing from methods {list(per_method)}")
    sizes = {np.asarray(v).shape for ms in per_method.values() for v in ms.values()}
    if len(sizes) != 1:
        raise ValueError(f"methods were evaluated on different test sets: shapes {sorted(sizes)}")
    n = next(iter(sizes))[0] if next(iter(sizes)) else 1
    if profile_ids is None:
        profile_ids = list(range(n))
    elif len(profile_ids) != n:
        raise ValueError(f"{len(profile_ids)} profile ids for {n} profiles")
    per_profile = {m: {k: np.atleast_1d(np.asarray(v, dtype=np.float64)) for k, v in ms.items()}
                   for m, ms in per_method.items()}
    # sort before reducing so the mean does not depend on evaluation order
    means = {m: {k: float(np.mean(np.sort(v))) for k, v in ms.items()} for m, ms in per_profile.items()}
    gains = {m: {k: gain(means[baseline][k], v) for k, v in ms.items()} for m, ms in means.items()}
    return MetricReport(per_profile, means, gains, baseline, list(profile_ids), wasserstein or {})
