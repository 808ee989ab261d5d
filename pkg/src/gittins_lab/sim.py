"""Discounted k-armed Gaussian bandit simulator and index policies.

Every policy scores each arm from its posterior belief and plays the
argmax (ties break to the lowest arm id, so runs are deterministic):

    greedy             mu
    bayes-ucb-gamma    mu + sigma * Phi^-1(gamma)
    bayes-ucb-horizon  mu + sigma * Phi^-1(1 - 1/T)
    optimistic         mu + sigma * z*(gamma)     (fully revealing relaxation)
    gittins            mu + sigma * table(noise_to_signal ratio)

Reproducibility contract: replication r draws from a generator seeded by
SeedSequence((seed, r)); within a replication the draw order is fixed
(unknown true means first, in arm order, then one noise draw per step).
Replications are mutually independent, the per-step noise draw does not
depend on the arm chosen, and records are assembled in replication order,
so results are bit-identical however the work is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import standardized_optimistic_index
from .normal import std_normal_quantile
from .posterior import NoiseModel
from .solver import IndexTable

_NOISE_CHUNK = 4096


@dataclass(frozen=True)
class ArmSpec:
    """Prior belief and noise for one arm; true mean drawn from the prior
    when not fixed."""

    prior_mean: float
    prior_variance: float
    noise: NoiseModel
    true_mean: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.prior_variance) and self.prior_variance > 0.0):
            raise ValueError(f"prior_variance must be positive, got {self.prior_variance!r}")


class Policy:
    """Maps per-arm beliefs to per-arm scores; the argmax is played."""

    name: str = "policy"
    needs_noise: bool = False

    def scores(
        self,
        means: np.ndarray,
        variances: np.ndarray,
        noise_variances: np.ndarray,
        discount: float,
        time: int,
        horizon: int,
    ) -> np.ndarray:
        raise NotImplementedError


class GreedyPolicy(Policy):
    name = "greedy"

    def scores(self, means, variances, noise_variances, discount, time, horizon):
        return means


class BayesUcbGammaPolicy(Policy):
    """Belief quantile at the discount itself."""

    name = "bayes-ucb-gamma"

    def scores(self, means, variances, noise_variances, discount, time, horizon):
        return means + np.sqrt(variances) * std_normal_quantile(discount)


class BayesUcbHorizonPolicy(Policy):
    """Belief quantile at 1 - 1/T for a known horizon T >= 2."""

    name = "bayes-ucb-horizon"

    def scores(self, means, variances, noise_variances, discount, time, horizon):
        if horizon < 2:
            raise ValueError("bayes-ucb-horizon needs a horizon of at least 2")
        return means + np.sqrt(variances) * std_normal_quantile(1.0 - 1.0 / horizon)


class OptimisticPolicy(Policy):
    """Fair tax under a fully revealing first observation (noise-free score)."""

    name = "optimistic"

    def scores(self, means, variances, noise_variances, discount, time, horizon):
        return means + np.sqrt(variances) * standardized_optimistic_index(discount)


class GittinsPolicy(Policy):
    """Exact-index policy backed by a precomputed standardized table.

    Ratios above the table's top (beliefs tighter than anything tabulated)
    are scored with the top entry: the standardized index vanishes as the
    ratio grows, and the sigma factor multiplying it vanishes even faster,
    so the score converges to the posterior mean, which is the exact
    known-arm limit.  Ratios below the table's bottom stay a hard error.
    """

    name = "gittins"
    needs_noise = True

    def __init__(self, table: IndexTable):
        self.table = table

    def scores(self, means, variances, noise_variances, discount, time, horizon):
        if not math.isclose(self.table.discount, discount, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(
                f"table discount {self.table.discount!r} does not match {discount!r}"
            )
        ratios = np.minimum(
            noise_variances / variances, self.table.noise_to_signal_grid[-1]
        )
        standardized = self.table.lookup_array(ratios.ravel()).reshape(ratios.shape)
        return means + np.sqrt(variances) * standardized


_POLICY_NAMES = (
    "gittins",
    "bayes-ucb-gamma",
    "bayes-ucb-horizon",
    "optimistic",
    "greedy",
)


def make_policy(name: str, table: IndexTable | None = None) -> Policy:
    if name == "gittins":
        if table is None:
            raise ValueError("the gittins policy requires a precomputed index table")
        return GittinsPolicy(table)
    if name == "bayes-ucb-gamma":
        return BayesUcbGammaPolicy()
    if name == "bayes-ucb-horizon":
        return BayesUcbHorizonPolicy()
    if name == "optimistic":
        return OptimisticPolicy()
    if name == "greedy":
        return GreedyPolicy()
    raise ValueError(f"unknown policy {name!r}; choose from {_POLICY_NAMES}")


def policy_choose(
    policy: Policy,
    beliefs: Sequence,
    discount: float,
    time: int,
    horizon: int,
    noise_variances: Sequence[float] | None = None,
) -> int:
    """Arm with the highest score; ties break to the lowest arm id."""
    if len(beliefs) == 0:
        raise ValueError("beliefs must be nonempty")
    means = np.array([[b.mean for b in beliefs]])
    variances = np.array([[b.variance for b in beliefs]])
    if noise_variances is None:
        if policy.needs_noise:
            raise ValueError(f"policy {policy.name!r} needs per-arm noise variances")
        noise = np.ones_like(means)
    else:
        noise = np.asarray(noise_variances, dtype=np.float64).reshape(1, -1)
    scores = policy.scores(means, variances, noise, discount, time, horizon)
    return int(np.argmax(scores[0]))


@dataclass(frozen=True)
class SimulationConfig:
    arms: tuple[ArmSpec, ...]
    discount: float
    horizon: int
    replications: int
    seed: int
    policy: Policy

    def __post_init__(self) -> None:
        if len(self.arms) == 0:
            raise ValueError("at least one arm is required")
        if not (0.0 < self.discount < 1.0):
            raise ValueError(f"discount must lie in (0, 1), got {self.discount!r}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon!r}")
        if self.replications < 1:
            raise ValueError(f"replications must be at least 1, got {self.replications!r}")


@dataclass(frozen=True)
class SimulationRecord:
    """Per-replication trace and discounted summaries.

    ``discounted_cum_rewards[t]`` is the running sum of gamma^s * reward_s
    for s <= t, accumulated in step order; ``discounted_total`` is its
    final entry.  Trace arrays are empty when the run skipped tracing.
    """

    replication: int
    arms: np.ndarray
    rewards: np.ndarray
    discounted_cum_rewards: np.ndarray
    index_values: np.ndarray
    discounted_total: float
    discounted_regret: float
    arm_counts: np.ndarray


def default_horizon(discount: float) -> int:
    """Steps until the residual discounted mass falls under 1e-6."""
    return max(1, math.ceil(math.log(1e-6) / math.log(discount)))


def residual_discount_mass(discount: float, horizon: int) -> float:
    """Discounted weight sum_{t >= horizon} gamma^t left out by truncation."""
    return discount**horizon / (1.0 - discount)


def _draw_true_means(
    arms: tuple[ArmSpec, ...], gens: list[np.random.Generator]
) -> np.ndarray:
    theta = np.empty((len(gens), len(arms)))
    for r, gen in enumerate(gens):
        for a, arm in enumerate(arms):
            if arm.true_mean is None:
                theta[r, a] = arm.prior_mean + math.sqrt(
                    arm.prior_variance
                ) * gen.standard_normal()
            else:
                theta[r, a] = arm.true_mean
    return theta


def _lockstep(
    config: SimulationConfig,
    policy: Policy,
    record_trace: bool,
    shadow_policy: Policy | None = None,
):
    """Advance all replications one step at a time with shared numpy ops."""
    arms = config.arms
    k = len(arms)
    R = config.replications
    T = config.horizon
    gamma = config.discount

    prior_vars = np.array([a.prior_variance for a in arms])
    noise_vars = np.array([a.noise.noise_variance for a in arms])
    noise_sds = np.sqrt(noise_vars)

    gens = [
        np.random.default_rng(np.random.SeedSequence(entropy=(config.seed, r)))
        for r in range(R)
    ]
    theta = _draw_true_means(arms, gens)
    theta_best = theta.max(axis=1)

    means = np.tile(np.array([a.prior_mean for a in arms]), (R, 1))
    counts = np.zeros((R, k), dtype=np.int64)
    rows = np.arange(R)

    disc_reward = np.zeros(R)
    disc_regret = np.zeros(R)
    agree_steps = 0
    gamma_pow = 1.0

    if record_trace:
        arms_trace = np.empty((T, R), dtype=np.int64)
        rewards_trace = np.empty((T, R))
        cum_trace = np.empty((T, R))
        scores_trace = np.empty((T, R, k))

    noise_chunk = np.empty((R, 0))
    chunk_pos = 0
    for t in range(T):
        if chunk_pos >= noise_chunk.shape[1]:
            width = min(_NOISE_CHUNK, T - t)
            noise_chunk = np.empty((R, width))
            for r, gen in enumerate(gens):
                noise_chunk[r] = gen.standard_normal(width)
            chunk_pos = 0

        variances = 1.0 / (1.0 / prior_vars + counts / noise_vars)
        scores = policy.scores(means, variances, noise_vars, gamma, t, T)
        choice = np.argmax(scores, axis=1)
        if shadow_policy is not None:
            shadow_scores = shadow_policy.scores(
                means, variances, noise_vars, gamma, t, T
            )
            agree_steps += int(np.sum(np.argmax(shadow_scores, axis=1) == choice))

        chosen_theta = theta[rows, choice]
        rewards = chosen_theta + noise_sds[choice] * noise_chunk[:, chunk_pos]
        chunk_pos += 1

        disc_reward += gamma_pow * rewards
        disc_regret += gamma_pow * (theta_best - chosen_theta)

        if record_trace:
            arms_trace[t] = choice
            rewards_trace[t] = rewards
            cum_trace[t] = disc_reward
            scores_trace[t] = scores

        v_old = variances[rows, choice]
        w = noise_vars[choice]
        v_new = 1.0 / (1.0 / v_old + 1.0 / w)
        means[rows, choice] = v_new * (means[rows, choice] / v_old + rewards / w)
        counts[rows, choice] += 1
        gamma_pow *= gamma

    records = []
    for r in range(R):
        if record_trace:
            record = SimulationRecord(
                replication=r,
                arms=arms_trace[:, r].copy(),
                rewards=rewards_trace[:, r].copy(),
                discounted_cum_rewards=cum_trace[:, r].copy(),
                index_values=scores_trace[:, r, :].copy(),
                discounted_total=float(disc_reward[r]),
                discounted_regret=float(disc_regret[r]),
                arm_counts=counts[r].copy(),
            )
        else:
            empty = np.empty(0)
            record = SimulationRecord(
                replication=r,
                arms=np.empty(0, dtype=np.int64),
                rewards=empty,
                discounted_cum_rewards=empty,
                index_values=np.empty((0, k)),
                discounted_total=float(disc_reward[r]),
                discounted_regret=float(disc_regret[r]),
                arm_counts=counts[r].copy(),
            )
        records.append(record)
    return records, agree_steps


def run(config: SimulationConfig, record_trace: bool = True) -> list[SimulationRecord]:
    """Simulate all replications; fully reproducible from the seed."""
    records, _ = _lockstep(config, config.policy, record_trace)
    return records


def agreement_rate(
    config: SimulationConfig, policy_a: Policy, policy_b: Policy
) -> float:
    """Fraction of steps where policy_b's argmax matches policy_a's choice.

    Both policies are evaluated on the belief trajectory policy_a induces
    (common random numbers), isolating score disagreement from trajectory
    divergence.
    """
    _, agree_steps = _lockstep(config, policy_a, False, shadow_policy=policy_b)
    return agree_steps / (config.replications * config.horizon)


def summarize(records: list[SimulationRecord]) -> dict:
    """Mean and standard error of discounted reward and regret."""
    rewards = np.array([r.discounted_total for r in records])
    regrets = np.array([r.discounted_regret for r in records])
    n = len(records)
    scale = math.sqrt(n) if n > 1 else 1.0
    return {
        "replications": n,
        "mean_discounted_reward": float(rewards.mean()),
        "stderr_discounted_reward": float(rewards.std(ddof=1) / scale) if n > 1 else 0.0,
        "mean_discounted_regret": float(regrets.mean()),
        "stderr_discounted_regret": float(regrets.std(ddof=1) / scale) if n > 1 else 0.0,
    }
