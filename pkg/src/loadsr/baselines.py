"""Linear-interpolation and MSE-only CNN reference methods."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LoadProfile
from .losses import LossWeights
from .networks import GeneratorConfig


def lerp_array(lr, alpha: int) -> np.ndarray:
    """Piecewise-linear upsampling along the last axis.

    Each LR value sits at the center of its block of ``alpha`` HR samples;
    the half-blocks outside the first and last centers are held flat.
    """
    lr = np.asarray(lr, dtype=np.float64)
    if alpha < 2:
        raise ValueError(f"scale-up factor must be >= 2, got {alpha}")
    m = lr.shape[-1]
    centers = np.arange(m) * alpha + (alpha - 1) / 2.0
    grid = np.arange(m * alpha)
    flat = lr.reshape(-1, m)
    out = np.stack([np.interp(grid, centers, row) for row in flat])
    return out.reshape(*lr.shape[:-1], m * alpha)


def lerp_upsample(lr: LoadProfile, alpha: int) -> LoadProfile:
    return LoadProfile(lerp_array(lr.values, alpha), lr.period // alpha, lr.day_id, lr.household_id)


@dataclass(frozen=True)
class TrainingSetup:
    generator: GeneratorConfig
    weights: LossWeights
    use_discriminator: bool
    use_polisher: bool


def cnn_baseline_config(generator: GeneratorConfig) -> TrainingSetup:
    """Same generator, content loss only, no discriminator or polishing."""
    return TrainingSetup(generator, LossWeights(0.0, 0.0), use_discriminator=False,
                         use_polisher=False)
