"""Point-wise versus shape-wise error measures.

A one-sample time shift leaves the amplitude spectrum untouched but costs a
lot of MSE; critical points from polyline simplification count how many
"corners" a profile has.

Run:  python demos/02_shape_metrics.py
"""
import numpy as np

from loadsr.data import SynthSpec, synthesize_profile
from loadsr.metrics import (cpe, default_rdp_eps, fce, mse, rdp_simplify, spectral_wasserstein,
                            wasserstein_1d)

x = synthesize_profile(SynthSpec(seed=1))[0].values
shifted = np.roll(x, 1)
print(f"shift by one sample: MSE {mse(shifted, x):.4f}, FCE {fce(shifted, x):.2e}")

smooth = np.convolve(x, np.ones(7) / 7, mode="same")
print(f"7-point smoothing:   MSE {mse(smooth, x):.4f}, FCE {fce(smooth, x):.4f}")

eps = default_rdp_eps(x)
print(f"\nRDP tolerance (5% of range): {eps:.3f} kW")
print(f"critical points: true {len(rdp_simplify(x, eps))}, smoothed {len(rdp_simplify(smooth, eps))}")
print(f"CPE(smoothed) = {cpe(smooth, x):.4f}")

poly = rdp_simplify([0.0, 1, 2, 3, 2, 1, 0], 0.5)
print(f"triangle keeps indices {poly.indices.tolist()}")

# Distribution-level comparison of spectra across many days
days = np.stack([synthesize_profile(SynthSpec(seed=s))[0].values for s in range(40)])
blurred = np.stack([np.convolve(d, np.ones(7) / 7, mode="same") for d in days])
wd = spectral_wasserstein(blurred, days, k=24)
print(f"\nspectral W1 over the first 24 bins: low bins {wd[:3].round(2)}, high bins {wd[-3:].round(2)}")
rng = np.random.default_rng(0)
a, b = rng.normal(0, 1, 5000), rng.normal(1, 1, 5000)
print(f"W1 between N(0,1) and N(1,1) samples: {wasserstein_1d(a, b):.3f} (exact value 1)")
