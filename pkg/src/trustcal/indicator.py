"""Per-trial trust labels: estimate the optimal opinion, then compare every opinion to it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trustcal.bandits import BanditPolicy
from trustcal.domain import (
    ArmSet,
    OpinionEncoding,
    RewardSpec,
    TrialRecord,
    build_augmented_context,
    compute_reward,
)
from trustcal.exceptions import ShapeError
from trustcal.rng import SplitMix64


@dataclass(frozen=True)
class TrustIndication:
    estimated_optimal: int
    agent_labels: tuple[bool, ...]
    team_label: bool
    fallback_used: bool


def label_opinions(estimated: int, agent_opinions, team_opinion: int) -> TrustIndication:
    """An opinion is trusted exactly when it equals the estimated optimum.

    If nothing matches, the estimate itself is offered as the fallback opinion.
    """
    labels = tuple(o == estimated for o in agent_opinions)
    team = team_opinion == estimated
    return TrustIndication(estimated, labels, team, not (any(labels) or team))


class TrustIndicator:
    """Wraps a bandit policy with the augmented-context encoding and reward spec.

    ``rng`` supplies the uniform draw each ``indicate`` call hands to the
    policy for exploration; policies without exploration ignore it.
    """

    def __init__(self, policy: BanditPolicy, arms: ArmSet, reward: RewardSpec,
                 encoding: OpinionEncoding, rng: SplitMix64 | None = None):
        self.policy = policy
        self.arms = arms
        self.reward = reward
        self.encoding = encoding
        self.rng = rng if rng is not None else SplitMix64(0)

    def context(self, record: TrialRecord) -> np.ndarray:
        x = build_augmented_context(record, self.arms, self.encoding)
        if len(x) != self.policy.dim:
            raise ShapeError(
                f"augmented context has length {len(x)} but the policy expects {self.policy.dim}"
            )
        return x

    def indicate(self, record: TrialRecord, x: np.ndarray | None = None) -> TrustIndication:
        """Estimate the optimal opinion for ``record`` and label each opinion.

        ``x`` may carry a precomputed augmented context for the record.
        """
        if x is None:
            x = self.context(record)
        elif len(x) != self.policy.dim:
            raise ShapeError(f"context has length {len(x)}, expected {self.policy.dim}")
        arm = self.policy.select(x, self.rng.random())
        return label_opinions(self.arms.value(arm), record.agent_opinions, record.team_opinion)

    def observe(self, record: TrialRecord, chosen: int, x: np.ndarray | None = None) -> float:
        """Reveal the reward of ``chosen`` (and only that arm) to the policy; returns it."""
        r = compute_reward(self.reward, chosen, record.truth_arm, self.arms)
        if x is None:
            x = self.context(record)
        self.policy.update(self.arms.index(chosen), x, r)
        return r
