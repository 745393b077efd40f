"""Release engines: perturb once, then project onto the target set.

Noise is injected exactly once per release, at the start; everything after
the single draw is deterministic post-processing, so the privacy guarantee of
the calibrated Gaussian draw carries through unchanged.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mechanism import NoiseSpec, PrivacyParams, RandomStream, calibrate_sigma
from .mechanism import sample_symmetric_gaussian
from .projections import ConvexSet, Intersection, UnsupportedSetError

DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 100_000


class DykstraConvergenceWarning(RuntimeWarning):
    """Dykstra hit the iteration cap before the per-cycle change fell below tol."""


@dataclass(frozen=True)
class EngineConfig:
    """Iteration count, randomness handle, and trajectory switch for a release."""

    iterations: int
    stream: RandomStream
    record_trajectory: bool = False

    def __post_init__(self):
        if not (isinstance(self.iterations, int) and self.iterations >= 1):
            raise ValueError(f"iterations must be an integer >= 1, got {self.iterations!r}")


@dataclass
class ReleaseOutput:
    """Released point plus the run diagnostics a sidecar needs."""

    point: np.ndarray
    sigma_used: float
    iterations_used: int
    final_residuals: tuple
    trajectory: Optional[list] = None


def default_iterations(n: int) -> int:
    """Default alternating-iteration count for an n x n problem, 12*log2(n) rounded up."""
    if n < 2:
        return 1
    return max(1, math.ceil(12.0 * math.log2(n)))


def _checked_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, atol=1e-8, rtol=0.0):
        raise ValueError("input matrix must be symmetric")
    return (a + a.T) / 2.0


def _member_sets(sets) -> tuple:
    if isinstance(sets, Intersection):
        sets = sets.members
    elif isinstance(sets, ConvexSet):
        sets = (sets,)
    sets = tuple(sets)
    if len(sets) < 1:
        raise ValueError("need at least one set")
    for s in sets:
        if isinstance(s, Intersection):
            raise UnsupportedSetError("nested intersections are not supported")
    return sets


def perturb_and_project(a: np.ndarray, set_: ConvexSet, params: PrivacyParams,
                        stream: RandomStream) -> ReleaseOutput:
    """Single calibrated symmetric noise draw followed by one closed-form projection."""
    if isinstance(set_, Intersection):
        raise UnsupportedSetError(
            "perturb_and_project needs a closed-form set; intersections go "
            "through perturb_and_alternately_project"
        )
    a = _checked_square(a)
    sigma = calibrate_sigma(params)
    w = sample_symmetric_gaussian(a.shape[0], NoiseSpec(sigma), stream)
    point = set_.project(a + w)
    return ReleaseOutput(
        point=point,
        sigma_used=sigma,
        iterations_used=1,
        final_residuals=(set_.residual(point),),
    )


def averaged_projection_step(x: np.ndarray, sets: Sequence[ConvexSet]) -> np.ndarray:
    """Uniform average of the projections of x onto each set, in listed order."""
    sets = _member_sets(sets)
    total = sets[0].project(x)
    for s in sets[1:]:
        total = total + s.project(x)
    return total / float(len(sets))


def perturb_and_alternately_project(a: np.ndarray, sets, params: PrivacyParams,
                                    config: EngineConfig) -> ReleaseOutput:
    """One noise draw, then `config.iterations` averaged projection steps.

    The iteration is deterministic given the noisy starting point, so the
    single draw at the start is the only randomness consumed.
    """
    sets = _member_sets(sets)
    a = _checked_square(a)
    sigma = calibrate_sigma(params)
    w = sample_symmetric_gaussian(a.shape[0], NoiseSpec(sigma), config.stream)
    x = a + w
    trajectory = [x.copy()] if config.record_trajectory else None
    for _ in range(config.iterations):
        x = averaged_projection_step(x, sets)
        if trajectory is not None:
            trajectory.append(x.copy())
    return ReleaseOutput(
        point=x,
        sigma_used=sigma,
        iterations_used=config.iterations,
        final_residuals=tuple(s.residual(x) for s in sets),
        trajectory=trajectory,
    )


def dykstra_reference(a: np.ndarray, sets, max_iter: int = DYKSTRA_MAX_ITER,
                      tol: float = DYKSTRA_TOL) -> np.ndarray:
    """Euclidean projection of a onto the intersection of the sets.

    Cyclic Dykstra iteration with one correction term per set. Unlike plain
    alternating projections this converges to the nearest point of the
    intersection, which is why it serves as the reference oracle. Hitting the
    iteration cap is reported with a warning, not an error, and the last
    iterate is returned.
    """
    sets = _member_sets(sets)
    x = np.array(a, dtype=float, copy=True)
    corrections = [np.zeros_like(x) for _ in sets]
    for _ in range(max_iter):
        x_prev = x
        for i, s in enumerate(sets):
            shifted = x + corrections[i]
            y = s.project(shifted)
            corrections[i] = shifted - y
            x = y
        if float(np.linalg.norm(x - x_prev)) < tol:
            return x
    warnings.warn(
        f"Dykstra did not reach per-cycle change below {tol:g} within {max_iter} cycles",
        DykstraConvergenceWarning,
    )
    return x
