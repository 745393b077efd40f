"""Gaussian noise calibration and reproducible sampling.

Sampling is a pure function of its arguments: the same (seed, stream_index)
always reproduces the same draw, bit for bit, on every platform and thread
count. Anything that needs two independent draws must use two streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget (epsilon, delta) plus the l2 sensitivity of the statistic."""

    epsilon: float
    delta: float
    sensitivity: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie strictly inside (0, 1), got {self.delta!r}")
        if not self.sensitivity > 0:
            raise ValueError(f"sensitivity must be positive, got {self.sensitivity!r}")


@dataclass(frozen=True)
class RandomStream:
    """Counter-style handle on a random substream.

    Distinct stream_index values give statistically independent streams under
    the same seed, so parallel trials can each carry their own stream and
    produce results that do not depend on scheduling.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_index < 0:
            raise ValueError("seed and stream_index must be nonnegative integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.Philox(ss))

    def shifted(self, offset: int) -> "RandomStream":
        """Stream with the same seed and stream_index moved by offset."""
        return RandomStream(self.seed, self.stream_index + offset)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-coordinate standard deviation of the noise to inject."""

    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")


def calibrate_sigma(params: PrivacyParams) -> float:
    """Noise scale sensitivity * sqrt(2 * ln(2/delta)) / epsilon.

    This is the standard Gaussian mechanism calibration: adding N(0, sigma^2)
    per coordinate to a statistic with l2 sensitivity `params.sensitivity`
    satisfies (epsilon, delta) differential privacy.
    """
    return params.sensitivity * math.sqrt(2.0 * math.log(2.0 / params.delta)) / params.epsilon


def sample_gaussian(shape, spec: NoiseSpec, stream: RandomStream) -> np.ndarray:
    """iid N(0, sigma^2) array of the given shape; exact zeros when sigma == 0."""
    if spec.sigma == 0:
        return np.zeros(shape)
    return stream.generator().standard_normal(shape) * spec.sigma


def sample_symmetric_gaussian(n: int, spec: NoiseSpec, stream: RandomStream) -> np.ndarray:
    """Symmetric n x n noise: iid N(0, sigma^2) on i <= j, mirrored below.

    Every independent coordinate (diagonal included) has standard deviation
    sigma, which is what the l2 calibration over the upper-triangle
    coordinates of a symmetric statistic requires.
    """
    if n < 1:
        raise ValueError(f"matrix side must be at least 1, got {n!r}")
    w = np.zeros((n, n))
    if spec.sigma == 0:
        return w
    rows, cols = np.triu_indices(n)
    w[rows, cols] = stream.generator().standard_normal(rows.size) * spec.sigma
    w[cols, rows] = w[rows, cols]
    return w
