"""Command-line front end.

Subcommands:

    index      exact index with bracket plus every closed-form score, as JSON
    verify     sweep the exact-vs-quantile gap over a discount grid (CSV + SVG)
    table      precompute and persist a standardized index table (JSON)
    simulate   run the k-armed simulator (trace CSV + summary JSON)
    agreement  decision agreement between two policies over a discount grid

Exit codes: 0 success, 2 usage error, 3 numeric/acceptance failure,
4 I/O error.  Every command is deterministic given its full argument list
(seeds included), and all files are written atomically with a metadata
header that echoes the invocation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .bounds import lower_bound_index, optimistic_index, quantile_index, upper_bound_info
from .charts import line_chart
from .posterior import NoiseModel, PosteriorState
from .sim import (
    ArmSpec,
    SimulationConfig,
    agreement_rate,
    default_horizon,
    make_policy,
    residual_discount_mass,
    run,
    summarize,
)
from .solver import (
    BracketError,
    IndexTable,
    ResolutionError,
    SolverConfig,
    build_table,
    gittins_index_standard,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class UsageError(ValueError):
    pass


class VerificationFailure(RuntimeError):
    """An acceptance-style property checked by a command did not hold."""


def _fmt(x: float) -> str:
    """Shortest decimal that round-trips the double exactly."""
    return repr(float(x))


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-gittins-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta(command: str, echo: dict) -> dict:
    return {"tool": "gittins-lab", "version": __version__, "command": command, "config": echo}


def _meta_header(command: str, echo: dict) -> str:
    lines = [
        f"# gittins-lab v{__version__}",
        f"# command: {command}",
        f"# config: {json.dumps(echo, sort_keys=True)}",
    ]
    return "\n".join(lines) + "\n"


def _parse_floats(text: str, flag: str) -> list[float]:
    if not text.strip():
        raise UsageError(f"{flag} must be a nonempty comma-separated list")
    try:
        return [float(part) for part in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"could not parse {flag}={text!r}: {exc}") from None


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    kwargs = {}
    if getattr(args, "horizon", None) is not None:
        kwargs["horizon"] = args.horizon
    if getattr(args, "tolerance", None) is not None:
        kwargs["bisection_tolerance"] = args.tolerance
    return SolverConfig(**kwargs)


def _load_table(path: str) -> IndexTable:
    with open(path) as handle:
        return IndexTable.from_json(handle.read())


def _arm_specs(args: argparse.Namespace) -> tuple[ArmSpec, ...]:
    mus = _parse_floats(args.mu, "--mu")
    sig2s = _parse_floats(args.sigma2, "--sigma2")
    noises = _parse_floats(args.noise_var, "--noise-var")
    _require(
        len(mus) == len(sig2s) == len(noises),
        "--mu, --sigma2, and --noise-var must list the same number of arms",
    )
    for s in sig2s:
        _require(s > 0.0, "every --sigma2 entry must be positive")
    for w in noises:
        _require(w > 0.0, "every --noise-var entry must be positive")
    return tuple(
        ArmSpec(prior_mean=m, prior_variance=s, noise=NoiseModel(w))
        for m, s, w in zip(mus, sig2s, noises)
    )


def _ratio_grid_for(arms: tuple[ArmSpec, ...], horizon: int, per_decade: int = 10) -> list[float]:
    """Log-spaced ratio grid covering every belief reachable in the run."""
    base = [a.noise.noise_variance / a.prior_variance for a in arms]
    lo = min(base) * 0.999
    hi = (max(base) + horizon) * 1.001
    n = max(2, math.ceil(math.log10(hi / lo) * per_decade) + 1)
    return list(np.geomspace(lo, hi, n))


def cmd_index(args: argparse.Namespace) -> int:
    _require(args.sigma2 > 0.0, "--sigma2 must be positive")
    _require(0.0 < args.gamma < 1.0, "--gamma must lie in (0, 1)")
    _require(args.noise_var > 0.0, "--noise-var must be positive")
    state = PosteriorState(mean=args.mu, variance=args.sigma2)
    gamma = args.gamma
    noise = NoiseModel(args.noise_var)
    ratio = noise.noise_variance / state.variance
    sigma = state.std

    if args.table:
        table = _load_table(args.table)
        _require(
            math.isclose(table.discount, gamma, rel_tol=0.0, abs_tol=1e-12),
            f"table at {args.table} was built for discount {table.discount!r}",
        )
        standardized = table.lookup(ratio)
        lo, hi = table.value_brackets[0]
        span = max(hi - lo for lo, hi in table.value_brackets)
        bracket = (standardized - span, standardized + span)
    else:
        standardized, bracket = gittins_index_standard(gamma, ratio, _solver_config(args))

    upper = upper_bound_info(gamma)
    lower = lower_bound_index(gamma, ratio)
    report = {
        "meta": _meta(
            "index",
            {"mu": args.mu, "sigma2": args.sigma2, "gamma": gamma, "noise_var": args.noise_var},
        ),
        "noise_to_signal": ratio,
        "exact_index": state.mean + sigma * standardized,
        "exact_bracket": [state.mean + sigma * bracket[0], state.mean + sigma * bracket[1]],
        "quantile_index": quantile_index(state, gamma),
        "optimistic_index": optimistic_index(state, gamma),
        "upper_bound": state.mean + sigma * upper.value,
        "upper_bound_fallback": upper.used_fallback,
        "lower_bound": state.mean + sigma * lower.bound,
        "lower_bound_degenerate": lower.degenerate,
        "exploration_length": lower.L,
    }
    text = json.dumps(report, indent=1)
    print(text)
    if args.out:
        _atomic_write(args.out, text + "\n")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    gammas = _parse_floats(args.grid, "--grid")
    _require(len(gammas) > 0, "--grid must contain at least one discount")
    _require(all(0.0 < g < 1.0 for g in gammas), "every discount must lie in (0, 1)")
    _require(gammas == sorted(gammas), "--grid must be sorted ascending")
    _require(args.ratio > 0.0, "--ratio must be positive")
    _require(bool(args.out), "--out is required")

    config = _solver_config(args)
    rows = []
    for gamma in gammas:
        exact, bracket = gittins_index_standard(gamma, args.ratio, config)
        quantile = quantile_index(PosteriorState(0.0, 1.0), gamma)
        rows.append(
            {
                "gamma": gamma,
                "exact_index": exact,
                "exact_bracket_lo": bracket[0],
                "exact_bracket_hi": bracket[1],
                "quantile_index": quantile,
                "optimistic_index": optimistic_index(PosteriorState(0.0, 1.0), gamma),
                "upper_bound": upper_bound_info(gamma).value,
                "lower_bound": lower_bound_index(gamma, args.ratio).bound,
                "gap_exact_vs_quantile": abs(exact - quantile),
            }
        )

    echo = {"grid": gammas, "ratio": args.ratio}
    columns = list(rows[0].keys())
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    _atomic_write(args.out, _meta_header("verify", echo) + "\n".join(lines) + "\n")

    svg_path = os.path.splitext(args.out)[0] + ".svg"
    xs = [math.log(1.0 / (1.0 - g)) for g in gammas]
    gaps = [row["gap_exact_vs_quantile"] for row in rows]
    svg = line_chart(
        [("|exact - quantile|", xs, gaps)],
        x_label="log(1/(1-gamma))",
        y_label="index gap",
        title="Exact index vs belief quantile",
    )
    _atomic_write(svg_path, svg)

    if len(gammas) >= 2:
        decreasing = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
        if not decreasing:
            raise VerificationFailure(
                "exact-vs-quantile gap is not strictly decreasing over the grid: "
                + ", ".join(f"{g}:{gap:.6f}" for g, gap in zip(gammas, gaps))
            )
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    ratios = _parse_floats(args.grid, "--grid")
    _require(all(r > 0.0 for r in ratios), "every ratio must be positive")
    _require(ratios == sorted(ratios), "--grid must be sorted ascending")
    _require(0.0 < args.gamma < 1.0, "--gamma must lie in (0, 1)")
    _require(bool(args.out), "--out is required")
    table = build_table(args.gamma, ratios, _solver_config(args))
    _atomic_write(args.out, table.to_json() + "\n")
    return EXIT_OK


def _simulation_config(args: argparse.Namespace) -> tuple[SimulationConfig, dict]:
    _require(0.0 < args.gamma < 1.0, "--gamma must lie in (0, 1)")
    _require(args.reps >= 1, "--reps must be at least 1")
    arms = _arm_specs(args)
    horizon = args.horizon if args.horizon is not None else default_horizon(args.gamma)
    _require(horizon >= 1, "--horizon must be at least 1")

    if args.policy == "gittins":
        if args.table:
            table = _load_table(args.table)
        else:
            table = build_table(
                args.gamma,
                _ratio_grid_for(arms, horizon),
                SolverConfig(bisection_tolerance=1e-3),
            )
        policy = make_policy("gittins", table=table)
    else:
        policy = make_policy(args.policy)

    config = SimulationConfig(
        arms=arms,
        discount=args.gamma,
        horizon=horizon,
        replications=args.reps,
        seed=args.seed,
        policy=policy,
    )
    echo = {
        "gamma": args.gamma,
        "horizon": horizon,
        "reps": args.reps,
        "seed": args.seed,
        "policy": args.policy,
        "mu": args.mu,
        "sigma2": args.sigma2,
        "noise_var": args.noise_var,
    }
    return config, echo


def cmd_simulate(args: argparse.Namespace) -> int:
    _require(bool(args.out), "--out is required")
    config, echo = _simulation_config(args)
    records = run(config)

    k = len(config.arms)
    columns = ["replication", "t", "arm", "reward", "discounted_cum_reward"] + [
        f"index_{i}" for i in range(k)
    ]
    lines = [",".join(columns)]
    for record in records:
        for t in range(config.horizon):
            row = [
                str(record.replication),
                str(t),
                str(int(record.arms[t])),
                _fmt(record.rewards[t]),
                _fmt(record.discounted_cum_rewards[t]),
            ] + [_fmt(record.index_values[t, i]) for i in range(k)]
            lines.append(",".join(row))
    _atomic_write(args.out, _meta_header("simulate", echo) + "\n".join(lines) + "\n")

    summary = {
        "meta": _meta("simulate", echo),
        "residual_discount_mass": residual_discount_mass(config.discount, config.horizon),
        **summarize(records),
    }
    summary_path = os.path.splitext(args.out)[0] + ".summary.json"
    _atomic_write(summary_path, json.dumps(summary, indent=1) + "\n")
    return EXIT_OK


def cmd_agreement(args: argparse.Namespace) -> int:
    _require(bool(args.out), "--out is required")
    names = args.policy.split(",")
    _require(len(names) == 2, "--policy must name two policies, e.g. gittins,bayes-ucb-gamma")
    gammas = _parse_floats(args.grid, "--grid") if args.grid else [args.gamma]
    _require(all(0.0 < g < 1.0 for g in gammas), "every discount must lie in (0, 1)")

    rows = []
    for gamma in gammas:
        arms = _arm_specs(args)
        horizon = args.horizon if args.horizon is not None else default_horizon(gamma)

        def realize(name: str) -> object:
            if name == "gittins":
                if args.table:
                    return make_policy("gittins", table=_load_table(args.table))
                table = build_table(
                    gamma,
                    _ratio_grid_for(arms, horizon),
                    SolverConfig(bisection_tolerance=1e-3),
                )
                return make_policy("gittins", table=table)
            return make_policy(name)

        policy_a = realize(names[0])
        policy_b = realize(names[1])
        config = SimulationConfig(
            arms=arms,
            discount=gamma,
            horizon=horizon,
            replications=args.reps,
            seed=args.seed,
            policy=policy_a,
        )
        rows.append((gamma, agreement_rate(config, policy_a, policy_b)))

    echo = {
        "grid": gammas,
        "reps": args.reps,
        "seed": args.seed,
        "policies": names,
        "mu": args.mu,
        "sigma2": args.sigma2,
        "noise_var": args.noise_var,
    }
    rates = [rate for _, rate in rows]
    monotone = all(rates[i + 1] >= rates[i] for i in range(len(rates) - 1))
    lines = ["gamma,agreement_rate"]
    for gamma, rate in rows:
        lines.append(f"{_fmt(gamma)},{_fmt(rate)}")
    lines.append(f"# monotone_nondecreasing: {str(monotone).lower()}")
    _atomic_write(args.out, _meta_header("agreement", echo) + "\n".join(lines) + "\n")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gittins-lab",
        description="Exact Gaussian Gittins indices, quantile approximations, and policy benchmarks",
    )
    parser.add_argument("--version", action="version", version=f"gittins-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="index report for one belief")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--noise-var", dest="noise_var", type=float, default=1.0)
    p.add_argument("--table", default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("verify", help="exact-vs-quantile gap sweep")
    p.add_argument("--grid", required=True, help="comma-separated discounts, ascending")
    p.add_argument("--ratio", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table", help="precompute a standardized index table")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--grid", required=True, help="comma-separated ratios, ascending")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table)

    def add_sim_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--gamma", type=float, default=0.9)
        p.add_argument("--mu", default="0,0")
        p.add_argument("--sigma2", default="1,1")
        p.add_argument("--noise-var", dest="noise_var", default="1,1")
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--reps", type=int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--table", default=None)
        p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="k-armed simulator run")
    add_sim_flags(p)
    p.add_argument("--policy", default="gittins")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("agreement", help="decision agreement between two policies")
    add_sim_flags(p)
    p.add_argument("--grid", default=None, help="optional comma-separated discounts")
    p.add_argument("--policy", default="gittins,bayes-ucb-gamma")
    p.set_defaults(func=cmd_agreement)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VerificationFailure, ResolutionError, BracketError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
