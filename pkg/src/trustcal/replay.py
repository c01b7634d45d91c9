"""Shuffled multi-run replay of logged trials through a bandit-driven trust indicator.

Each run permutes the dataset with its own seed, starts a fresh policy, and
for every trial asks the indicator for the estimated optimal opinion, credits
the reward that opinion would have earned, and then reveals that reward (and
only that one) to the policy. Baselines are the totals the logged opinion
streams earned, and the trust calibration distance of a stream is
``|G - g|`` where ``G`` is the best achievable total.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from trustcal.bandits import Algorithm, BanditPolicy, Hyperparameters, make_policy, policy_from_state
from trustcal.domain import (
    DatasetInfo,
    OpinionEncoding,
    RewardSpec,
    TrialRecord,
    compute_reward,
    context_matrix,
    max_reward,
)
from trustcal.exceptions import EmptyInputError, InsufficientDataError, TrustCalError
from trustcal.indicator import TrustIndicator
from trustcal.rng import SplitMix64, derive_seed, shuffle

TEAM = "o"


@dataclass(frozen=True)
class Baselines:
    """Order-independent totals: ``G`` and one ``g`` per logged opinion stream."""

    n: int
    G: float
    agents: tuple[float, ...]
    team: float

    def distance(self, g: float) -> float:
        return abs(self.G - g)


def baseline_totals(records: Sequence[TrialRecord], reward: RewardSpec) -> Baselines:
    if not records:
        raise EmptyInputError("baseline totals need at least one trial")
    m = len(records[0].agent_opinions)
    G = math.fsum(max_reward(reward, r.truth_arm) for r in records)
    agents = tuple(
        math.fsum(compute_reward(reward, r.agent_opinions[i], r.truth_arm) for r in records)
        for i in range(m)
    )
    team = math.fsum(compute_reward(reward, r.team_opinion, r.truth_arm) for r in records)
    return Baselines(len(records), G, agents, team)


def t_test_vs_baseline(run_totals: Sequence[float], baseline: float) -> tuple[float, float]:
    """Two-sided one-sample t-test of run totals against a fixed baseline.

    Zero-variance samples follow a convention: ``t = +/-inf, p = 0`` when the
    common value differs from the baseline, ``t = 0, p = 1`` when it equals it.
    """
    totals = np.asarray(run_totals, dtype=float)
    if totals.size < 2:
        raise InsufficientDataError(f"a t-test needs at least 2 runs, got {totals.size}")
    if np.ptp(totals) == 0:
        diff = totals[0] - baseline
        if diff == 0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    res = stats.ttest_1samp(totals, baseline)
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class ReplayConfig:
    """One replay experiment.

    Run ``k`` uses seed ``base_seed + k * seed_stride``; ``reward`` and
    ``encoding`` default to the dataset's own when left as ``None``.
    ``workers > 1`` spreads runs over processes without changing results.
    """

    algorithm: Algorithm = Algorithm.LINUCB
    runs: int = 100
    base_seed: int = 0
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    reward: RewardSpec | None = None
    encoding: OpinionEncoding | None = None
    seed_stride: int = 1
    workers: int = 1
    track_curves: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def run_seed(self, k: int) -> int:
        return self.base_seed + k * self.seed_stride


@dataclass(frozen=True)
class ReplaySummary:
    dataset: str
    algorithm: Algorithm
    config: ReplayConfig
    info: DatasetInfo
    baselines: Baselines
    run_totals: tuple[float, ...]
    mean: float
    se: float
    t: float
    p: float
    # mean cumulative trust distance per trial position, keyed by stream label
    curves: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.baselines.n

    @property
    def G(self) -> float:
        return self.baselines.G

    @property
    def indicator_T(self) -> float:
        return self.baselines.distance(self.mean)

    def baseline_rows(self) -> list[tuple[str, float, float]]:
        """``(label, g, T)`` for every logged opinion stream, team last."""
        labels = self.info.opinion_labels()
        rows = [(lab, g, self.baselines.distance(g)) for lab, g in zip(labels, self.baselines.agents)]
        rows.append((TEAM, self.baselines.team, self.baselines.distance(self.baselines.team)))
        return rows

    def same_results(self, other: ReplaySummary) -> bool:
        """Bit-level equality of every reported number."""
        return (self.run_totals == other.run_totals and self.baselines == other.baselines
                and _same_float(self.mean, other.mean) and _same_float(self.se, other.se)
                and _same_float(self.t, other.t) and _same_float(self.p, other.p))


def _same_float(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


@dataclass
class _RunInput:
    records: tuple[TrialRecord, ...]
    contexts: np.ndarray
    info: DatasetInfo
    reward: RewardSpec
    encoding: OpinionEncoding
    config: ReplayConfig


@dataclass
class RunResult:
    seed: int
    total: float
    rewards: np.ndarray  # indicator reward per shuffled trial position
    order: list[int]


def run_single(inp: _RunInput, k: int) -> RunResult:
    """Run ``k`` of a replay: shuffle, fresh policy, indicate/credit/observe per trial."""
    cfg = inp.config
    seed = cfg.run_seed(k)
    order = shuffle(len(inp.records), seed)
    policy = make_policy(cfg.algorithm, len(inp.info.arms), inp.contexts.shape[1], cfg.hyper,
                         seed=derive_seed(seed, 1))
    indicator = TrustIndicator(policy, inp.info.arms, inp.reward, inp.encoding,
                               SplitMix64(derive_seed(seed, 2)))
    rewards = np.empty(len(order))
    for pos, i in enumerate(order):
        record = inp.records[i]
        x = inp.contexts[i]
        estimate = indicator.indicate(record, x).estimated_optimal
        rewards[pos] = indicator.observe(record, estimate, x)
    return RunResult(seed, math.fsum(rewards), rewards, order)


def _run_star(args):
    return run_single(*args)


def run_replay(dataset, config: ReplayConfig, info: DatasetInfo | None = None) -> ReplaySummary:
    """Replay ``dataset`` ``config.runs`` times and summarise the indicator's totals.

    ``dataset`` is an :class:`~trustcal.ingest.Dataset` or a plain sequence of
    records together with ``info``.
    """
    records = tuple(dataset)
    info = info if info is not None else dataset.info
    if not records:
        raise EmptyInputError("cannot replay an empty dataset")
    reward = config.reward or info.reward
    encoding = config.encoding or info.encoding
    info = DatasetInfo(info.arms, reward, encoding, info.n_features, info.n_agents,
                       info.name, info.agent_names)
    for r in records:
        r.validate(info.arms)
    contexts = context_matrix(records, info.arms, encoding)
    inp = _RunInput(records, contexts, info, reward, encoding, config)
    baselines = baseline_totals(records, reward)

    jobs = [(inp, k) for k in range(config.runs)]
    if config.workers > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_star, jobs))
    else:
        results = [_run_star(job) for job in jobs]

    totals = tuple(res.total for res in results)
    if max(totals) > baselines.G + 1e-9 * max(1.0, abs(baselines.G)):
        raise TrustCalError(f"a run total {max(totals)} exceeds the maximum G={baselines.G}")
    arr = np.array(totals)
    mean = float(math.fsum(totals) / len(totals))
    if len(totals) > 1:
        se = float(arr.std(ddof=1) / math.sqrt(len(totals)))
        t, p = t_test_vs_baseline(totals, baselines.team)
    else:
        se = t = p = math.nan
    curves = _mean_distance_curves(records, info, reward, results) if config.track_curves else {}
    return ReplaySummary(info.name, config.algorithm, config, info, baselines, totals,
                         mean, se, t, p, curves)


def _mean_distance_curves(records, info, reward, results) -> dict:
    """Mean over runs of the cumulative distance ``|G_t - g_t|`` for each stream."""
    per_trial_max = np.array([max_reward(reward, r.truth_arm) for r in records])
    streams = {lab: np.array([compute_reward(reward, r.agent_opinions[i], r.truth_arm) for r in records])
               for i, lab in enumerate(info.opinion_labels())}
    streams[TEAM] = np.array([compute_reward(reward, r.team_opinion, r.truth_arm) for r in records])
    sums = {lab: np.zeros(len(records)) for lab in [*streams, "indicator"]}
    for res in results:
        cum_max = np.cumsum(per_trial_max[res.order])
        sums["indicator"] += np.abs(cum_max - np.cumsum(res.rewards))
        for lab, values in streams.items():
            sums[lab] += np.abs(cum_max - np.cumsum(values[res.order]))
    return {lab: s / len(results) for lab, s in sums.items()}


def regret_curve(policy: BanditPolicy, env, n: int, seed: int = 0) -> np.ndarray:
    """Cumulative pseudo-regret of ``policy`` over ``n`` rounds of ``env``.

    Regret at each round is the gap between the best and the chosen arm's
    expected payoff; the policy sees a noisy reward for the chosen arm only.
    """
    gen = SplitMix64(seed)
    regret = np.empty(n)
    for t in range(n):
        x = env.context()
        mu = env.expected(x)
        arm = policy.select(x, gen.random())
        regret[t] = mu.max() - mu[arm]
        policy.update(arm, x, env.reward(x, arm))
    return np.cumsum(regret)


# --- policy snapshots ------------------------------------------------------

SNAPSHOT_FORMAT = "trustcal-policy-snapshot"
SNAPSHOT_VERSION = 1


def save_snapshot(policy: BanditPolicy, path) -> None:
    """Write a policy's full state as a versioned ``.npz`` archive."""
    state = policy.state_dict()
    meta = {"format": SNAPSHOT_FORMAT, "version": SNAPSHOT_VERSION, "algorithm": policy.name}
    with open(path, "wb") as fh:
        np.savez(fh, **{f"meta_{k}": np.array(v) for k, v in meta.items()},
                 **{k: np.asarray(v) for k, v in state.items()})


def load_snapshot(path) -> BanditPolicy:
    with np.load(Path(path), allow_pickle=False) as data:
        if "meta_format" not in data or str(data["meta_format"]) != SNAPSHOT_FORMAT:
            raise TrustCalError(f"{path}: not a policy snapshot")
        version = int(data["meta_version"])
        if version != SNAPSHOT_VERSION:
            raise TrustCalError(f"{path}: unsupported snapshot version {version}")
        state = {k: data[k] for k in data.files if not k.startswith("meta_")}
        state["algorithm"] = str(data["meta_algorithm"])
    for key, value in list(state.items()):
        if isinstance(value, np.ndarray) and value.ndim == 0:
            state[key] = value.item()
    return policy_from_state(state)
