"""Trials, opinions, rewards and the augmented context fed to the bandits."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from trustcal.exceptions import InvalidArmError, InvalidRecordError


@dataclass(frozen=True)
class ArmSet:
    """Ordered set of K integer opinion values."""

    arms: tuple[int, ...]

    def __post_init__(self):
        arms = tuple(int(a) for a in self.arms)
        if len(arms) < 2:
            raise ValueError(f"an arm set needs at least 2 arms, got {len(arms)}")
        if any(b <= a for a, b in zip(arms, arms[1:])):
            raise ValueError(f"arm values must be strictly increasing: {arms}")
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(arms)})

    @classmethod
    def binary(cls) -> ArmSet:
        return cls((0, 1))

    @classmethod
    def from_range(cls, start: int, stop: int, step: int) -> ArmSet:
        """Arms ``start, start+step, ..., stop`` (``stop`` inclusive)."""
        return cls(tuple(range(start, stop + 1, step)))

    def __len__(self):
        return len(self.arms)

    def __iter__(self):
        return iter(self.arms)

    def __contains__(self, value):
        return value in self._index

    def index(self, value: int) -> int:
        try:
            return self._index[value]
        except (KeyError, TypeError):
            raise InvalidArmError(f"{value!r} is not in arm set {self.arms}") from None

    def value(self, index: int) -> int:
        return self.arms[index]


@dataclass(frozen=True)
class TrialRecord:
    """One logged decision: context, the m agent opinions, team opinion and the truth arm."""

    trial_id: int
    features: tuple[float, ...]
    agent_opinions: tuple[int, ...]
    team_opinion: int
    truth_arm: int

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "agent_opinions", tuple(int(v) for v in self.agent_opinions))

    def validate(self, arms: ArmSet) -> None:
        if self.trial_id < 0:
            raise InvalidRecordError(f"trial {self.trial_id}: negative trial id")
        fields = [(f"o_{i + 1}", o) for i, o in enumerate(self.agent_opinions)]
        fields += [("o_team", self.team_opinion), ("truth", self.truth_arm)]
        for name, value in fields:
            if value not in arms:
                raise InvalidRecordError(
                    f"trial {self.trial_id}: {name}={value} is not in arm set {arms.arms}"
                )


class RewardKind(enum.Enum):
    UNIT = "unit"  # 1 if correct else 0
    SIGNED = "signed"  # +1 correct, -1 incorrect
    ABS100 = "abs100"  # 100 - |truth - chosen|


@dataclass(frozen=True)
class RewardSpec:
    kind: RewardKind

    @classmethod
    def parse(cls, name: str) -> RewardSpec:
        try:
            return cls(RewardKind(name.lower()))
        except ValueError:
            choices = ", ".join(k.value for k in RewardKind)
            raise ValueError(f"unknown reward kind {name!r} (expected one of {choices})") from None


class OpinionEncoding(enum.Enum):
    RAW = "raw"
    ONE_HOT = "onehot"

    @classmethod
    def parse(cls, name: str) -> OpinionEncoding:
        key = name.lower().replace("-", "").replace("_", "")
        for enc in cls:
            if enc.value == key:
                return enc
        raise ValueError(f"unknown encoding {name!r} (expected raw or onehot)")


def compute_reward(spec: RewardSpec, chosen: int, truth: int, arms: ArmSet | None = None) -> float:
    """Reward of deciding ``chosen`` when ``truth`` is the correct opinion.

    When ``arms`` is given both values are checked for membership.
    """
    if arms is not None:
        arms.index(chosen)
        arms.index(truth)
    if spec.kind is RewardKind.UNIT:
        return 1.0 if chosen == truth else 0.0
    if spec.kind is RewardKind.SIGNED:
        return 1.0 if chosen == truth else -1.0
    return 100.0 - abs(truth - chosen)


def max_reward(spec: RewardSpec, truth: int) -> float:
    """Per-trial maximum, attained by choosing the truth arm."""
    return compute_reward(spec, truth, truth)


def reward_table(spec: RewardSpec, arms: ArmSet) -> np.ndarray:
    """``table[c, t]`` is the reward of choosing arm index c when arm index t is correct."""
    return np.array(
        [[compute_reward(spec, c, t) for t in arms] for c in arms], dtype=float
    )


def context_dim(n_features: int, n_agents: int, arms: ArmSet, encoding: OpinionEncoding) -> int:
    width = 1 if encoding is OpinionEncoding.RAW else len(arms)
    return n_features + (n_agents + 1) * width


def build_augmented_context(
    record: TrialRecord, arms: ArmSet, encoding: OpinionEncoding
) -> np.ndarray:
    """Concatenate features, agent opinions and the team opinion into one vector.

    RAW writes each opinion's numeric arm value; ONE_HOT writes a K-wide
    indicator per opinion. The returned array is read-only.
    """
    opinions = (*record.agent_opinions, record.team_opinion)
    for i, o in enumerate(opinions):
        if o not in arms:
            name = "o_team" if i == len(opinions) - 1 else f"o_{i + 1}"
            raise InvalidRecordError(
                f"trial {record.trial_id}: {name}={o} is not in arm set {arms.arms}"
            )
    j = len(record.features)
    if encoding is OpinionEncoding.RAW:
        x = np.empty(j + len(opinions))
        x[:j] = record.features
        x[j:] = opinions
    else:
        k = len(arms)
        x = np.zeros(j + len(opinions) * k)
        x[:j] = record.features
        for i, o in enumerate(opinions):
            x[j + i * k + arms.index(o)] = 1.0
    x.flags.writeable = False
    return x


def context_matrix(
    records: Sequence[TrialRecord], arms: ArmSet, encoding: OpinionEncoding
) -> np.ndarray:
    """Stack augmented contexts row-wise, checking the width is constant."""
    rows = [build_augmented_context(r, arms, encoding) for r in records]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise InvalidRecordError(f"augmented contexts have differing widths {sorted(widths)}")
    return np.vstack(rows) if rows else np.empty((0, 0))


@dataclass(frozen=True)
class DatasetInfo:
    """Static description of a record collection needed by the replay harness."""

    arms: ArmSet
    reward: RewardSpec
    encoding: OpinionEncoding
    n_features: int
    n_agents: int
    name: str = "dataset"
    agent_names: tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return context_dim(self.n_features, self.n_agents, self.arms, self.encoding)

    def opinion_labels(self) -> list[str]:
        if self.agent_names:
            return list(self.agent_names)
        return [f"o_{i + 1}" for i in range(self.n_agents)]


def default_encoding(arms: ArmSet) -> OpinionEncoding:
    """ONE_HOT for binary arms, RAW for longer ordered scales such as 0..100 risk."""
    return OpinionEncoding.ONE_HOT if len(arms) == 2 else OpinionEncoding.RAW
