"""Conjugate Gaussian belief updates for a single arm.

An arm has unknown mean reward theta; observing a reward R ~ N(theta, w)
against a N(m, v) prior yields the standard precision-weighted posterior

    v' = (1/v + 1/w)^-1
    m' = v' * (m/v + R/w)

After t observations the posterior variance is deterministic,

    v_t = (1/v_0 + t/w)^-1,

and the *posterior mean* after L observations is itself random before the
data arrive: by the law of total variance it is distributed

    m_L ~ N(m_0, v_0 - v_L).

The variance recursion is carried in precision form (sums of reciprocals)
so that iterating to t ~ 1e5 does not accumulate cancellation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PosteriorState:
    """Gaussian belief (mean, variance) about an arm's mean reward."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mean):
            raise ValueError(f"mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.variance) and self.variance > 0.0):
            raise ValueError(f"variance must be positive, got {self.variance!r}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise: rewards are N(theta, noise_variance)."""

    noise_variance: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.noise_variance) and self.noise_variance > 0.0):
            raise ValueError(
                f"noise_variance must be positive, got {self.noise_variance!r}"
            )


def update(state: PosteriorState, noise: NoiseModel, reward: float) -> PosteriorState:
    """One conjugate update; posterior variance strictly decreases."""
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward!r}")
    prior_precision = 1.0 / state.variance
    noise_precision = 1.0 / noise.noise_variance
    new_variance = 1.0 / (prior_precision + noise_precision)
    new_mean = new_variance * (prior_precision * state.mean + noise_precision * reward)
    return PosteriorState(mean=new_mean, variance=new_variance)


def variance_after(prior_variance: float, noise: NoiseModel, t: int) -> float:
    """Posterior variance after t observations: (1/v0 + t/w)^-1.

    Equals prior_variance at t = 0 and is strictly decreasing in t.
    """
    if not (math.isfinite(prior_variance) and prior_variance > 0.0):
        raise ValueError(f"prior_variance must be positive, got {prior_variance!r}")
    if t < 0 or t != int(t):
        raise ValueError(f"t must be a nonnegative integer, got {t!r}")
    return 1.0 / (1.0 / prior_variance + t / noise.noise_variance)


def next_mean_distribution(
    state: PosteriorState, noise: NoiseModel
) -> tuple[float, float]:
    """Distribution N(mean, var) of the one-step-ahead posterior mean."""
    return mean_after_L_distribution(state, noise, 1)


def mean_after_L_distribution(
    state: PosteriorState, noise: NoiseModel, L: int
) -> tuple[float, float]:
    """Distribution N(mean, var) of the posterior mean after L observations.

    The variance is v_0 - v_L (law of total variance), clamped at 0 to
    absorb rounding at the perfect-learning limit.
    """
    if L < 1:
        raise ValueError(f"L must be a positive integer, got {L!r}")
    residual = variance_after(state.variance, noise, L)
    return state.mean, max(0.0, state.variance - residual)
