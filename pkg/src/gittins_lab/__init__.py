"""Exact Gaussian Gittins indices, quantile approximations, and a policy bench.

The package computes the fair tax (index) of a Gaussian arm three ways:

* exactly, by backward induction over the retirement game with certified
  truncation brackets (:mod:`gittins_lab.solver`);
* in closed or implicitly defined form: the belief-quantile score, the
  fully-revealing-observation (optimistic) index, and two-sided analytic
  bounds (:mod:`gittins_lab.bounds`);
* at scale, through precomputed interpolation tables keyed by the
  noise-to-signal ratio (:class:`gittins_lab.solver.IndexTable`).

A discounted k-armed simulator (:mod:`gittins_lab.sim`) benchmarks the
policies these scores induce, and :mod:`gittins_lab.cli` exposes the whole
toolchain as the ``gittins-lab`` command.
"""

from .bounds import (
    LowerBoundDiagnostics,
    UpperBoundResult,
    lower_bound_index,
    optimistic_index,
    quantile_index,
    standardized_optimistic_index,
    upper_bound_index,
    upper_bound_info,
)
from .normal import (
    TailSandwich,
    excess_sandwich,
    expected_excess,
    gordon_bounds,
    quantile_asymptotic,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    std_normal_sf,
)
from .posterior import (
    NoiseModel,
    PosteriorState,
    mean_after_L_distribution,
    next_mean_distribution,
    update,
    variance_after,
)
from .sim import (
    ArmSpec,
    SimulationConfig,
    SimulationRecord,
    agreement_rate,
    make_policy,
    policy_choose,
    run,
    summarize,
)
from .solver import (
    BracketError,
    ExtrapolationError,
    GameSpec,
    IndexTable,
    ResolutionError,
    SolverConfig,
    build_table,
    gittins_index,
    gittins_index_standard,
    value_function,
)

__version__ = "0.1.0"

__all__ = [
    "ArmSpec",
    "BracketError",
    "ExtrapolationError",
    "GameSpec",
    "IndexTable",
    "LowerBoundDiagnostics",
    "NoiseModel",
    "PosteriorState",
    "ResolutionError",
    "SimulationConfig",
    "SimulationRecord",
    "SolverConfig",
    "TailSandwich",
    "UpperBoundResult",
    "agreement_rate",
    "build_table",
    "excess_sandwich",
    "expected_excess",
    "gittins_index",
    "gittins_index_standard",
    "gordon_bounds",
    "lower_bound_index",
    "make_policy",
    "mean_after_L_distribution",
    "next_mean_distribution",
    "optimistic_index",
    "policy_choose",
    "quantile_asymptotic",
    "quantile_index",
    "run",
    "standardized_optimistic_index",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "std_normal_sf",
    "summarize",
    "update",
    "upper_bound_index",
    "upper_bound_info",
    "value_function",
    "variance_after",
]
