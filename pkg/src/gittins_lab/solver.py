"""Exact index computation by dynamic programming over the retirement game.

The exact index of a belief N(mu, sigma^2) is the largest tax lam at which
the one-armed retirement game still has nonnegative value.  The game value
is monotone decreasing in the tax, so the index is found by bisection on
lam, with each candidate evaluated by the backward-induction kernel in
``_engine``.  Two closed-form truncation rules (a feasible floor and a
clairvoyant cap) bracket every value, and running the bisection once per
rule brackets the index itself:

    [last floor-rule lam with V >= 0, first cap-rule lam with V < 0],

padded by a discretization allowance on each side.  The reported bracket
therefore accounts for horizon truncation (the horizon is chosen to keep
the inter-rule gap an order of magnitude below the bisection tolerance),
bisection granularity (roots are located at an eighth of the tolerance),
and the measured grid bias of the integrator; its width stays below twice
the bisection tolerance.  The reported index is the bracket midpoint.

A standardization identity reduces every belief to the standard one:

    index(mu, sigma^2, noise w) = mu + sigma * index(0, 1, w / sigma^2),

so precomputed tables are keyed only by the discount and the
noise-to-signal ratio w / sigma^2, and are interpolated monotonically in
log ratio.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _engine
from .normal import std_normal_quantile
from .posterior import NoiseModel, PosteriorState

# Beliefs tighter than this are treated as fully known: no learning is
# possible and the fair tax is the mean itself.
DEGENERATE_VARIANCE = 1e-12

# Per-side bracket allowance for discretization bias, as a fraction of the
# bisection tolerance.  The grid error of the closed-form integrator was
# measured at ~0.33*(grid spacing / posterior sd)^2 in standardized index
# units at noise-to-signal ratio 1 (~3.3e-4 at the default 401-point
# grid), growing roughly like sqrt(ratio) because noisier transitions
# smooth the slices less per step.  The allowance follows that calibration
# and saturates so the reported width never exceeds twice the tolerance.
_DISCRETIZATION_PAD = 0.4
_PAD_RATIO_CAP = 2.25


def _discretization_pad(tolerance: float, ratio: float) -> float:
    scale = min(math.sqrt((ratio + 1.0) / 2.0), _PAD_RATIO_CAP)
    return _DISCRETIZATION_PAD * tolerance * scale

TABLE_FORMAT_VERSION = 1


class ResolutionError(RuntimeError):
    """The discretization could not certify a bracket of the required width."""


class BracketError(RuntimeError):
    """A bisection interval failed to straddle zero; the value function is broken."""


class ExtrapolationError(ValueError):
    """A table lookup fell outside the tabulated ratio range."""


def _require_discount(discount: float) -> float:
    discount = float(discount)
    if not (math.isfinite(discount) and 0.0 < discount < 1.0):
        raise ValueError(f"discount must lie in (0, 1), got {discount!r}")
    return discount


@dataclass(frozen=True)
class GameSpec:
    """One-armed retirement game: per-play tax, discount, observation noise."""

    tax: float
    discount: float
    noise: NoiseModel

    def __post_init__(self) -> None:
        if not math.isfinite(self.tax):
            raise ValueError(f"tax must be finite, got {self.tax!r}")
        _require_discount(self.discount)


@dataclass(frozen=True)
class SolverConfig:
    """Discretization knobs for the backward-induction solver.

    ``horizon=None`` derives the truncation from the discount and the
    bisection tolerance via N = ceil(log(tol*(1-gamma)/20) / log(gamma)),
    which keeps the discounted truncation slack an order of magnitude
    below the tolerance.  ``terminal_rule`` selects a single truncation
    rule for diagnostic runs; bracket-producing entry points always
    evaluate both rules and ignore it.  ``quadrature_nodes`` is kept for
    configuration-format stability; the transition expectation is taken
    in closed form (see :mod:`gittins_lab._engine`), so no sampled
    quadrature rule is involved.
    """

    horizon: int | None = None
    mean_grid_halfwidth: float = 8.0
    mean_grid_points: int = 401
    quadrature_nodes: int = 16
    bisection_tolerance: float = 1e-3
    terminal_rule: str | None = None

    def __post_init__(self) -> None:
        if self.horizon is not None and self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if self.mean_grid_halfwidth <= 0.0:
            raise ValueError("mean_grid_halfwidth must be positive")
        if self.mean_grid_points < 33:
            raise ValueError("mean_grid_points must be at least 33")
        if self.quadrature_nodes < 8:
            raise ValueError("quadrature_nodes must be at least 8")
        if self.bisection_tolerance <= 0.0:
            raise ValueError("bisection_tolerance must be positive")
        if self.terminal_rule not in (None, "commit_or_retire_lower", "clairvoyant_upper"):
            raise ValueError(f"unknown terminal_rule {self.terminal_rule!r}")

    def resolved_horizon(self, discount: float) -> int:
        if self.horizon is not None:
            return self.horizon
        n = math.log(self.bisection_tolerance * (1.0 - discount) / 20.0) / math.log(
            discount
        )
        return max(1, math.ceil(n))

    def refined(self, discount: float | None = None) -> "SolverConfig":
        """Doubled horizon, grid, and quadrature (for stability checks).

        A derived horizon needs the discount to be resolved before it can
        be doubled.
        """
        horizon = self.horizon
        if horizon is None:
            if discount is None:
                raise ValueError("pass the discount to resolve the horizon first")
            horizon = self.resolved_horizon(discount)
        return replace(
            self,
            horizon=2 * horizon,
            # 2P-1 halves the spacing exactly and keeps the tax on a node
            mean_grid_points=2 * self.mean_grid_points - 1,
            quadrature_nodes=2 * self.quadrature_nodes,
        )

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "mean_grid_halfwidth": self.mean_grid_halfwidth,
            "mean_grid_points": self.mean_grid_points,
            "quadrature_nodes": self.quadrature_nodes,
            "bisection_tolerance": self.bisection_tolerance,
            "terminal_rule": self.terminal_rule,
        }

    @staticmethod
    def from_dict(data: dict) -> "SolverConfig":
        return SolverConfig(**data)


_RULE_IDS = {"commit_or_retire_lower": 0, "clairvoyant_upper": 1}


def _evaluate(
    mu0: float,
    variance0: float,
    noise_vars: np.ndarray,
    discount: float,
    lams: np.ndarray,
    rules: np.ndarray,
    config: SolverConfig,
    horizon: int,
) -> np.ndarray:
    return _engine.batched_values(
        mu0,
        variance0,
        noise_vars,
        discount,
        lams,
        rules,
        horizon,
        config.mean_grid_points,
        config.mean_grid_halfwidth,
    )


def value_function(
    state: PosteriorState, game: GameSpec, config: SolverConfig = SolverConfig()
) -> tuple[float, float]:
    """Certified (lower, upper) bracket on the retirement-game value.

    The two ends run the same recursion under the feasible-floor and
    clairvoyant-cap truncation rules; monotonicity of the recursion makes
    lower <= upper hold exactly.  A bracket wider than a sanity multiple
    of the bisection tolerance signals an inadequate discretization.
    """
    horizon = config.resolved_horizon(game.discount)
    noise_vars = np.array([game.noise.noise_variance] * 2)
    lams = np.array([game.tax] * 2)
    rules = np.array([0, 1])
    lower, upper = _evaluate(
        state.mean,
        state.variance,
        noise_vars,
        game.discount,
        lams,
        rules,
        config,
        horizon,
    )
    slack_budget = 20.0 * config.bisection_tolerance * max(1.0, state.std)
    if upper - lower > slack_budget:
        raise ResolutionError(
            f"value bracket width {upper - lower:.3e} exceeds sanity budget "
            f"{slack_budget:.3e}; refine the solver configuration"
        )
    return float(lower), float(upper)


@dataclass(frozen=True)
class _SolveResult:
    index: float
    bracket: tuple[float, float]


def _solve_standardized(
    discount: float, ratios: Sequence[float], config: SolverConfig
) -> list[_SolveResult]:
    """Bisect the standardized index for each ratio, both rules batched."""
    discount = _require_discount(discount)
    for r in ratios:
        if not (math.isfinite(r) and r > 0.0):
            raise ValueError(f"noise-to-signal ratio must be positive, got {r!r}")
    horizon = config.resolved_horizon(discount)
    n = len(ratios)
    noise_vars = np.repeat(np.asarray(ratios, dtype=np.float64), 2)
    rules = np.tile(np.array([0, 1]), n)

    hi0 = std_normal_quantile(discount) + 3.0
    lo = np.zeros(2 * n)
    hi = np.full(2 * n, hi0)

    def values(lams: np.ndarray) -> np.ndarray:
        return _evaluate(0.0, 1.0, noise_vars, discount, lams, rules, config, horizon)

    v_lo = values(lo)
    v_hi = values(hi)
    if np.any(v_lo < -1e-6):
        raise BracketError(
            f"game value at tax 0 should be nonnegative, got min {v_lo.min():.3e}"
        )
    if np.any(v_hi >= 0.0):
        raise BracketError(
            f"game value at tax {hi0:.3f} should be negative, got max {v_hi.max():.3e}"
        )

    # Synchronized bisection: all intervals start at the same width, so
    # they converge in the same number of halvings.  The roots are located
    # an order of magnitude below the tolerance so that the reported
    # bracket is not quantized at its own width.
    target = 0.125 * 0.9 * config.bisection_tolerance
    steps = math.ceil(math.log2(hi0 / target))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        keep = values(mid) >= 0.0
        lo = np.where(keep, mid, lo)
        hi = np.where(keep, hi, mid)

    results = []
    for i in range(n):
        pad = _discretization_pad(config.bisection_tolerance, ratios[i])
        floor_lo = lo[2 * i] - pad
        cap_hi = hi[2 * i + 1] + pad
        width = cap_hi - floor_lo
        if width > 2.0 * config.bisection_tolerance:
            raise ResolutionError(
                f"index bracket width {width:.3e} exceeds twice the bisection "
                f"tolerance at ratio {ratios[i]!r}; increase the horizon or grid"
            )
        results.append(
            _SolveResult(
                index=0.5 * (floor_lo + cap_hi), bracket=(float(floor_lo), float(cap_hi))
            )
        )
    return results


def gittins_index_standard(
    discount: float, noise_to_signal: float, config: SolverConfig = SolverConfig()
) -> tuple[float, tuple[float, float]]:
    """Standardized exact index and its certified bracket."""
    result = _solve_standardized(discount, [noise_to_signal], config)[0]
    return result.index, result.bracket


@dataclass(frozen=True)
class IndexTable:
    """Precomputed standardized indices over a noise-to-signal ratio grid.

    Lookups interpolate linearly in log ratio (the index varies smoothly
    and monotonically there) and refuse to extrapolate outside the grid.
    """

    discount: float
    noise_to_signal_grid: tuple[float, ...]
    index_values: tuple[float, ...]
    value_brackets: tuple[tuple[float, float], ...]
    solver_config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        grid = self.noise_to_signal_grid
        if len(grid) == 0:
            raise ValueError("table must contain at least one ratio")
        if any(r <= 0.0 for r in grid):
            raise ValueError("ratios must be positive")
        if list(grid) != sorted(grid):
            raise ValueError("ratios must be sorted ascending")
        if not (len(grid) == len(self.index_values) == len(self.value_brackets)):
            raise ValueError("grid, indices, and brackets must have equal length")
        for value, (lo, hi) in zip(self.index_values, self.value_brackets):
            if not lo <= value <= hi:
                raise ValueError(f"index {value!r} outside its bracket ({lo!r}, {hi!r})")

    def lookup(self, noise_to_signal: float) -> float:
        return float(self.lookup_array(np.array([noise_to_signal]))[0])

    def lookup_array(self, noise_to_signal: np.ndarray) -> np.ndarray:
        ratios = np.asarray(noise_to_signal, dtype=np.float64)
        grid = np.asarray(self.noise_to_signal_grid)
        rel = 1e-9
        if np.any(ratios < grid[0] * (1.0 - rel)) or np.any(
            ratios > grid[-1] * (1.0 + rel)
        ):
            raise ExtrapolationError(
                f"ratio outside tabulated range [{grid[0]!r}, {grid[-1]!r}]"
            )
        clipped = np.clip(ratios, grid[0], grid[-1])
        return np.interp(
            np.log(clipped), np.log(grid), np.asarray(self.index_values)
        )

    def to_json(self) -> str:
        payload = {
            "format_version": TABLE_FORMAT_VERSION,
            "discount": self.discount,
            "ratios": list(self.noise_to_signal_grid),
            "indices": list(self.index_values),
            "brackets": [list(b) for b in self.value_brackets],
            "solver_config": self.solver_config.to_dict(),
        }
        return json.dumps(payload, indent=1)

    @staticmethod
    def from_json(text: str) -> "IndexTable":
        payload = json.loads(text)
        version = payload.get("format_version")
        if version != TABLE_FORMAT_VERSION:
            raise ValueError(f"unsupported table format_version {version!r}")
        return IndexTable(
            discount=payload["discount"],
            noise_to_signal_grid=tuple(payload["ratios"]),
            index_values=tuple(payload["indices"]),
            value_brackets=tuple(tuple(b) for b in payload["brackets"]),
            solver_config=SolverConfig.from_dict(payload["solver_config"]),
        )


def build_table(
    discount: float, ratios: Sequence[float], config: SolverConfig = SolverConfig()
) -> IndexTable:
    """Solve the standardized index for every ratio (one batched bisection)."""
    ratios = [float(r) for r in ratios]
    if list(ratios) != sorted(ratios):
        raise ValueError("ratios must be sorted ascending")
    results = _solve_standardized(discount, ratios, config)
    return IndexTable(
        discount=float(discount),
        noise_to_signal_grid=tuple(ratios),
        index_values=tuple(r.index for r in results),
        value_brackets=tuple(r.bracket for r in results),
        solver_config=config,
    )


def _solve_raw(
    state: PosteriorState, discount: float, noise: NoiseModel, config: SolverConfig
) -> float:
    """Bisection on the tax in original units, bypassing standardization."""
    horizon = config.resolved_horizon(discount)
    noise_vars = np.array([noise.noise_variance] * 2)
    rules = np.array([0, 1])
    sigma = state.std

    def values(lams: np.ndarray) -> np.ndarray:
        return _evaluate(
            state.mean,
            state.variance,
            noise_vars,
            discount,
            lams,
            rules,
            config,
            horizon,
        )

    span = sigma * (std_normal_quantile(discount) + 3.0)
    lo = np.full(2, state.mean)
    hi = np.full(2, state.mean + span)
    v_lo = values(lo)
    v_hi = values(hi)
    if np.any(v_lo < -1e-6 * max(1.0, sigma)):
        raise BracketError("game value at tax mu should be nonnegative")
    if np.any(v_hi >= 0.0):
        raise BracketError("game value at the bisection cap should be negative")
    target = 0.125 * 0.9 * config.bisection_tolerance
    steps = max(0, math.ceil(math.log2(span / target)))
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        keep = values(mid) >= 0.0
        lo = np.where(keep, mid, lo)
        hi = np.where(keep, hi, mid)
    floor_lo, cap_hi = lo[0], hi[1]
    if cap_hi - floor_lo > 2.0 * config.bisection_tolerance * max(1.0, sigma):
        raise ResolutionError("index bracket exceeds tolerance in raw-unit solve")
    return float(0.5 * (floor_lo + cap_hi))


def gittins_index(
    state: PosteriorState,
    discount: float,
    noise: NoiseModel,
    table: IndexTable | None = None,
    config: SolverConfig = SolverConfig(),
    standardize: bool = True,
) -> float:
    """Exact index of a belief: mu + sigma * standardized_index(ratio).

    With a table the standardized index is interpolated (refusing to
    extrapolate); otherwise it is solved directly.  ``standardize=False``
    runs the bisection in original units instead, which exercises the
    standardization identity as an end-to-end property rather than an
    algebraic rescaling.
    """
    discount = _require_discount(discount)
    if state.variance < DEGENERATE_VARIANCE:
        return state.mean
    ratio = noise.noise_variance / state.variance
    if table is not None:
        if not math.isclose(table.discount, discount, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(
                f"table was built for discount {table.discount!r}, not {discount!r}"
            )
        return state.mean + state.std * table.lookup(ratio)
    if standardize:
        index, _ = gittins_index_standard(discount, ratio, config)
        return state.mean + state.std * index
    return _solve_raw(state, discount, noise, config)
