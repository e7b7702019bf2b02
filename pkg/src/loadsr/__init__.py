"""Two-stage GAN super-resolution of smart-meter load profiles, in numpy."""
from .baselines import lerp_array, lerp_upsample
from .data import LoadProfile, WeatherTrack, downsample, synthesize_corpus
from .metrics import cpe, fce, mse, ple, rdp_simplify, wasserstein_1d
from .training import RunConfig, run_pipeline

__all__ = ["LoadProfile", "WeatherTrack", "downsample", "synthesize_corpus", "lerp_array",
           "lerp_upsample", "mse", "ple", "fce", "cpe", "rdp_simplify", "wasserstein_1d",
           "RunConfig", "run_pipeline"]
