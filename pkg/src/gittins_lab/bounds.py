"""Closed-form index approximations and two-sided index bounds.

Four scores attach to a Gaussian arm with belief N(mu, sigma^2) and
discount gamma in (0, 1):

* quantile index      mu + sigma * Phi^-1(gamma)
      the gamma-quantile of the belief, i.e. a Bayesian UCB score.

* optimistic index    the fair tax of a fully revealing first play:
      the unique lam solving (gamma/(1-gamma)) E[(theta-lam)^+] = lam - mu.
      Always dominates the exact dynamic-programming index, since a
      decision-maker who learns theta outright can only be better off.

* implicit upper bound   lam solving (gamma/(1-gamma)) phi(lam) = lam
      (standardized arm), obtained by bounding the optimistic excess with
      the density.  Dominates the optimistic index for lam >= 0.

* explore-then-commit lower bound   the fair tax certified by sampling a
      predetermined number of periods L and then either retiring or
      committing forever.  Certification goes through a truncated-mean
      tail bound that is only valid for taxes at least two posterior-mean
      standard deviations out, so the construction degenerates at
      moderate discounts; degenerate cases are flagged, not raised.

All implicit equations are monotone in lam in the relevant region and are
solved by plain bisection to 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from .normal import (
    expected_excess,
    quantile_asymptotic,
    std_normal_pdf,
    std_normal_quantile,
)
from .posterior import NoiseModel, PosteriorState, variance_after

_BISECTION_TOL = 1e-9
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Below this discount the density-based upper bound is not studied and the
# (tighter, always valid) optimistic index is substituted, with a flag.
_UPPER_BOUND_MIN_DISCOUNT = 0.6


@dataclass(frozen=True)
class LowerBoundDiagnostics:
    """Explore-then-commit lower bound together with its ingredients.

    L is the exploration length, residual_variance the posterior variance
    left after L samples, h the slowly varying log correction appearing in
    the implicit equation, and bound the certified fair tax.  When no tax
    in the tail-bound validity region satisfies the defining inequality,
    ``bound`` is the validity floor itself and ``degenerate`` is True.
    """

    L: int
    h: float
    residual_variance: float
    bound: float
    degenerate: bool


@dataclass(frozen=True)
class UpperBoundResult:
    value: float
    used_fallback: bool


def _require_discount(discount: float) -> float:
    discount = float(discount)
    if not (math.isfinite(discount) and 0.0 < discount < 1.0):
        raise ValueError(f"discount must lie in (0, 1), got {discount!r}")
    return discount


def _bisect_decreasing(
    f: Callable[[float], float], lo: float, hi: float, tol: float = _BISECTION_TOL
) -> float:
    """Root of a strictly decreasing f with f(lo) >= 0 > f(hi)."""
    if f(lo) < 0.0:
        raise ValueError("bisection bracket does not straddle the root")
    while f(hi) >= 0.0:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile_index(state: PosteriorState, discount: float) -> float:
    """Belief quantile mu + sigma * Phi^-1(gamma)."""
    discount = _require_discount(discount)
    return state.mean + state.std * std_normal_quantile(discount)


@lru_cache(maxsize=None)
def standardized_optimistic_index(discount: float) -> float:
    """Root z* of (gamma/(1-gamma)) E[(Z - z)^+] = z for Z ~ N(0, 1).

    The left side is strictly decreasing in z and the right side strictly
    increasing, so the root is unique and positive.
    """
    discount = _require_discount(discount)
    factor = discount / (1.0 - discount)

    def gap(z: float) -> float:
        return factor * expected_excess(1.0, z) - z

    return _bisect_decreasing(gap, 0.0, 1.0)


def optimistic_index(state: PosteriorState, discount: float) -> float:
    """Fair tax under a fully revealing first observation.

    Solves (gamma/(1-gamma)) E[(theta - lam)^+] = lam - mu over
    theta ~ N(mu, sigma^2); by standardization this is
    mu + sigma * z*(gamma) and does not depend on the observation noise.
    """
    return state.mean + state.std * standardized_optimistic_index(discount)


def upper_bound_info(discount: float) -> UpperBoundResult:
    """Density-implicit upper bound on the standardized exact index.

    Solves (gamma/(1-gamma)) phi(lam) = lam by bisection.  Below the
    studied discount range the optimistic index (itself a valid upper
    bound) is returned instead, flagged as a fallback.
    """
    discount = _require_discount(discount)
    if discount < _UPPER_BOUND_MIN_DISCOUNT:
        value = standardized_optimistic_index(discount)
        return UpperBoundResult(value=value, used_fallback=True)
    factor = discount / (1.0 - discount)

    def gap(lam: float) -> float:
        return factor * std_normal_pdf(lam) - lam

    hi = 2.0 * quantile_asymptotic(discount) + 5.0
    root = _bisect_decreasing(gap, 0.0, hi)
    return UpperBoundResult(value=root, used_fallback=False)


def upper_bound_index(discount: float) -> float:
    return upper_bound_info(discount).value


def exploration_length(discount: float, noise_to_signal: float) -> int:
    """Exploration budget ceil(r * log(1/(1-gamma))^2), at least 1."""
    discount = _require_discount(discount)
    if not (math.isfinite(noise_to_signal) and noise_to_signal > 0.0):
        raise ValueError(f"noise_to_signal must be positive, got {noise_to_signal!r}")
    x = math.log(1.0 / (1.0 - discount))
    return max(1, math.ceil(noise_to_signal * x * x))


def lower_bound_index(discount: float, noise_to_signal: float) -> LowerBoundDiagnostics:
    """Explore-then-commit lower bound on the standardized exact index.

    Explores for L = ceil(r * log(1/(1-gamma))^2) periods; the posterior
    mean after exploration is N(0, 1 - v_L) with v_L the residual
    variance.  The certified tax is the largest lam satisfying

        log(gamma^L / (1-gamma)) + log((1-v_L)^2 / lam^3)
            >= log(L*lam) - log phi(lam / sqrt(1-v_L)),

    restricted to the tail-bound validity region lam >= 2*sqrt(1-v_L).
    The left-minus-right gap is strictly decreasing in lam, so bisection
    applies.  If the inequality already fails at the validity floor the
    bound is reported as the floor with ``degenerate=True``.
    """
    discount = _require_discount(discount)
    L = exploration_length(discount, noise_to_signal)
    residual = variance_after(1.0, NoiseModel(noise_to_signal), L)
    spread_sq = 1.0 - residual  # variance of the post-exploration mean
    h = (
        -math.log(L)
        + L * math.log(discount)
        + 2.0 * math.log(spread_sq)
        + _LOG_SQRT_2PI
    )

    # Gap between the two sides of the defining inequality, in log space.
    const = (
        L * math.log(discount)
        + math.log(1.0 / (1.0 - discount))
        + 2.0 * math.log(spread_sq)
        - math.log(L)
        - _LOG_SQRT_2PI
    )

    def gap(lam: float) -> float:
        return const - 4.0 * math.log(lam) - lam * lam / (2.0 * spread_sq)

    floor = 2.0 * math.sqrt(spread_sq)
    if gap(floor) < 0.0:
        return LowerBoundDiagnostics(
            L=L, h=h, residual_variance=residual, bound=floor, degenerate=True
        )
    bound = _bisect_decreasing(gap, floor, floor + 1.0)
    return LowerBoundDiagnostics(
        L=L, h=h, residual_variance=residual, bound=bound, degenerate=False
    )
