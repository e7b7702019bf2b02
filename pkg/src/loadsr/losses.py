"""Training objectives for the generator, discriminator and polisher.

All functions accept tensors of shape ``(batch, 1, N)`` (or plain arrays)
and return a scalar :class:`Tensor`; batch entries are averaged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, diff, log, mean, square, tabs, tsum
from .layers import max_pool1d

LOG_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    adversarial: float = 0.05
    feature: float = 0.5

    def __post_init__(self):
        if self.adversarial < 0 or self.feature < 0:
            raise ValueError("loss weights must be nonnegative")


def _same_shape(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def _per_sample_sq(x: Tensor) -> Tensor:
    """Squared norm of each batch entry, averaged over the batch."""
    batch = x.shape[0] if x.ndim > 1 else 1
    return tsum(square(x)) * (1.0 / batch)


def content_loss(gen_hr, true_hr) -> Tensor:
    """Point-to-point MSE, ``||gen - true||^2 / N``."""
    gen_hr, true_hr = as_tensor(gen_hr), as_tensor(true_hr)
    _same_shape(gen_hr, true_hr, "content_loss")
    return mean(square(gen_hr - true_hr))


def discriminator_loss(score_real, score_fake) -> Tensor:
    """``-[log D(real) + log(1 - D(fake))]``."""
    score_real, score_fake = as_tensor(score_real), as_tensor(score_fake)
    return -mean(log(score_real + LOG_EPS) + log((1.0 + LOG_EPS) - score_fake))


def adversarial_loss(score_fake) -> Tensor:
    """Non-saturating generator objective ``-log D(G(x))``."""
    return -mean(log(as_tensor(score_fake) + LOG_EPS))


def adversarial_loss_saturating(score_fake) -> Tensor:
    """``log(1 - D(G(x)))``; kept for comparison, training uses the
    non-saturating form."""
    return mean(log((1.0 + LOG_EPS) - as_tensor(score_fake)))


def feature_matching_loss(features_fake, features_real) -> Tensor:
    """Sum over layers of the squared distance between feature maps."""
    if len(features_fake) != len(features_real) or not features_fake:
        raise ValueError(f"feature_matching_loss: {len(features_fake)} fake vs "
                         f"{len(features_real)} real layers")
    total = None
    for j, (f, r) in enumerate(zip(features_fake, features_real)):
        f, r = as_tensor(f), as_tensor(r)
        _same_shape(f, r, f"feature_matching_loss layer {j}")
        term = _per_sample_sq(f - r)
        total = term if total is None else total + term
    return total


def generator_loss(content, adversarial, feature, weights: LossWeights = LossWeights()) -> Tensor:
    return as_tensor(content) + weights.adversarial * as_tensor(adversarial) \
        + weights.feature * as_tensor(feature)


def _length_normalized_sq(a: Tensor, b: Tensor, n: int) -> Tensor:
    batch = a.shape[0] if a.ndim > 1 else 1
    return tsum(square(a - b)) * (1.0 / (n * batch))


def outline_loss(gen_hr, true_hr, k_max: int = 3, s_max: int = 1) -> Tensor:
    """Match upper envelopes (max-pool) and lower envelopes (max-pool of
    the negated signal)."""
    gen_hr, true_hr = as_tensor(gen_hr), as_tensor(true_hr)
    _same_shape(gen_hr, true_hr, "outline_loss")
    n = gen_hr.shape[-1]
    upper = _length_normalized_sq(max_pool1d(gen_hr, k_max, s_max), max_pool1d(true_hr, k_max, s_max), n)
    lower = _length_normalized_sq(max_pool1d(-gen_hr, k_max, s_max),
                                  max_pool1d(-true_hr, k_max, s_max), n)
    return upper + lower


def switching_loss(gen_hr, true_hr, k_max: int = 3, s_max: int = 1) -> Tensor:
    """Match max-pooled absolute first differences.

    The N - 1 differences are normalized by N, the profile length.
    """
    gen_hr, true_hr = as_tensor(gen_hr), as_tensor(true_hr)
    _same_shape(gen_hr, true_hr, "switching_loss")
    n = gen_hr.shape[-1]
    g = max_pool1d(tabs(diff(gen_hr)), k_max, s_max)
    t = max_pool1d(tabs(diff(true_hr)), k_max, s_max)
    return _length_normalized_sq(g, t, n)


def polishing_loss(gen_hr, true_hr, k_max: int = 3, s_max: int = 1) -> Tensor:
    return outline_loss(gen_hr, true_hr, k_max, s_max) + switching_loss(gen_hr, true_hr, k_max, s_max)


def polishing_terms(gen_hr, true_hr, k_max: int = 3, s_max: int = 1):
    """``(total, outline, switching)`` sharing one graph."""
    out = outline_loss(gen_hr, true_hr, k_max, s_max)
    sw = switching_loss(gen_hr, true_hr, k_max, s_max)
    return out + sw, out, sw


def as_float(t: Tensor) -> float:
    return float(np.asarray(t.data))
