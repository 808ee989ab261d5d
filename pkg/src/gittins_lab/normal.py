"""Scalar standard-normal analytics used throughout the library.

Everything here is a pure function of its arguments.  The module collects
the small set of Gaussian facts the index computations lean on:

    phi(z)  = (2*pi)^(-1/2) exp(-z^2/2)          density
    Phi(z)  = int_{-inf}^{z} phi                  CDF, via erfc for tail accuracy
    Phi^-1  = quantile                            strictly inside (0, 1) only

    sqrt(2 log(1/(1-p)))                          asymptotic quantile growth
    (z/(1+z^2)) phi(z) <= 1-Phi(z) <= phi(z)/z    Gordon tail bounds, z >= 0
    E[(X - lam)^+], X ~ N(0, sigma^2)
        = sigma*phi(lam/sigma) - lam*(1 - Phi(lam/sigma))
    (sigma^4/lam^3) phi(lam/sigma)
        <= E[(X - lam)^+] <= sigma*phi(lam/sigma)   valid for lam >= 2*sigma

Accuracy targets: CDF absolute error <= 1e-12, quantile round-trip
Phi(Phi^-1(p)) = p to 1e-10.  Quantiles at p in {0, 1} raise instead of
returning +-inf so downstream tax computations can never silently go
infinite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtri

# Probability values are plain floats in [0, 1]; validated at the boundary.
Probability = float

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT_2 = math.sqrt(2.0)


@dataclass(frozen=True)
class TailSandwich:
    """Two-sided bracket of a truncated-mean tail integral.

    ``lower <= exact <= upper`` whenever the bracket's precondition
    (tax at least two standard deviations above the mean) holds.
    All three values are in reward units.
    """

    lower: float
    exact: float
    upper: float


def _require_finite(name: str, x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def std_normal_pdf(z: float) -> float:
    """Standard normal density phi(z) = exp(-z^2/2) / sqrt(2 pi)."""
    z = _require_finite("z", z)
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def std_normal_cdf(z: float) -> Probability:
    """Standard normal CDF Phi(z), accurate in both tails.

    Computed as erfc(-z/sqrt(2))/2, which keeps full relative accuracy
    for z << 0 where the naive 0.5*(1+erf) form underflows to rounding.
    """
    z = _require_finite("z", z)
    return 0.5 * math.erfc(-z / _SQRT_2)


def std_normal_sf(z: float) -> Probability:
    """Upper tail 1 - Phi(z) with full relative accuracy for z >> 0.

    The literal difference 1 - Phi(z) is absorbed by rounding once the
    tail drops below machine epsilon, so tail quantities must come
    through erfc directly.
    """
    z = _require_finite("z", z)
    return 0.5 * math.erfc(z / _SQRT_2)


def std_normal_quantile(p: Probability) -> float:
    """Inverse standard normal CDF on the open interval (0, 1).

    Raises ValueError at p in {0, 1} and outside [0, 1]: callers build
    taxes and index values out of this, and an infinite tax is never a
    meaningful answer.
    """
    p = _require_finite("p", p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile requires 0 < p < 1, got {p!r}")
    return float(ndtri(p))


def quantile_asymptotic(p: Probability) -> float:
    """Leading-order growth sqrt(2 log(1/(1-p))) of the normal quantile.

    Matches std_normal_quantile(p) only as p -> 1; the gap decays like
    log log / sqrt(log), i.e. extremely slowly.  Finite and positive for
    p >= 1 - exp(-1).
    """
    p = _require_finite("p", p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile_asymptotic requires 0 < p < 1, got {p!r}")
    return math.sqrt(2.0 * math.log(1.0 / (1.0 - p)))


def gordon_bounds(z: float) -> tuple[Probability, Probability]:
    """Classical two-sided bounds on the upper tail 1 - Phi(z), z >= 0.

    Returns ``((z/(1+z^2)) phi(z), phi(z)/z)``.  At z = 0 the upper bound
    is reported as the vacuous 1 rather than infinity so the return stays
    a valid probability pair.
    """
    z = _require_finite("z", z)
    if z < 0.0:
        raise ValueError(f"gordon_bounds requires z >= 0, got {z!r}")
    pdf = std_normal_pdf(z)
    lower = z / (1.0 + z * z) * pdf
    upper = min(1.0, pdf / z) if z > 0.0 else 1.0
    return lower, upper


def expected_excess(sigma: float, lam: float) -> float:
    """E[(X - lam)^+] for X ~ N(0, sigma^2), in closed form.

    Equals sigma*phi(lam/sigma) - lam*(1 - Phi(lam/sigma)).  Nonnegative,
    decreasing in lam, and -> 0 as lam -> +inf.  The erfc-backed CDF keeps
    the cancellation between the two terms benign deep in the tail.
    """
    sigma = _require_finite("sigma", sigma)
    lam = _require_finite("lam", lam)
    if sigma <= 0.0:
        raise ValueError(f"expected_excess requires sigma > 0, got {sigma!r}")
    z = lam / sigma
    return sigma * std_normal_pdf(z) - lam * std_normal_sf(z)


def excess_sandwich(sigma: float, lam: float) -> TailSandwich:
    """Bracket E[(X - lam)^+] between its closed-form tail bounds.

    Valid for lam >= 2*sigma; below that the bounds are not guaranteed to
    order correctly, so the call is rejected rather than extrapolated.
    """
    sigma = _require_finite("sigma", sigma)
    lam = _require_finite("lam", lam)
    if sigma <= 0.0:
        raise ValueError(f"excess_sandwich requires sigma > 0, got {sigma!r}")
    if lam < 2.0 * sigma:
        raise ValueError(
            f"excess_sandwich requires lam >= 2*sigma (got lam={lam!r}, sigma={sigma!r})"
        )
    z = lam / sigma
    pdf = std_normal_pdf(z)
    lower = (sigma**4 / lam**3) * pdf
    upper = sigma * pdf
    return TailSandwich(lower=lower, exact=expected_excess(sigma, lam), upper=upper)
