"""Contextual bandit policies sharing one select/update contract."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Protocol

from trustcal.bandits.ann import Adam, MLPBandit
from trustcal.bandits.linucb import LinUCB
from trustcal.bandits.tree import RegressionTree, TreeBandit, best_split, fit_tree


class BanditPolicy(Protocol):
    name: str
    n_arms: int
    dim: int

    def select(self, x, u: float) -> int:
        """Arm index for context ``x``; ``u`` is a uniform draw in [0, 1) for exploration."""

    def update(self, arm: int, x, r: float) -> None:
        ...

    def state_dict(self) -> dict:
        ...


class Algorithm(enum.Enum):
    LINUCB = "linucb"
    TREE = "tree"
    ANN = "ann"

    @property
    def label(self) -> str:
        return {"linucb": "CB LinUCB", "tree": "CB DT", "ann": "CB ANN"}[self.value]


@dataclass(frozen=True)
class Hyperparameters:
    """Knobs for all three algorithms; each policy reads only its own."""

    alpha: float = 1.0
    theta_update: str = "accumulate"
    retrain_period: int = 50
    max_depth: int = 6
    min_leaf: int = 5
    epsilon_floor: float = 0.01
    hidden: int = 15
    lr: float = 1e-3

    def for_algorithm(self, algorithm: Algorithm) -> dict:
        keys = {
            Algorithm.LINUCB: ("alpha", "theta_update"),
            Algorithm.TREE: ("retrain_period", "max_depth", "min_leaf", "epsilon_floor"),
            Algorithm.ANN: ("hidden", "lr", "epsilon_floor"),
        }[algorithm]
        values = asdict(self)
        return {k: values[k] for k in keys}


POLICIES = {Algorithm.LINUCB: LinUCB, Algorithm.TREE: TreeBandit, Algorithm.ANN: MLPBandit}


def make_policy(algorithm: Algorithm, n_arms: int, dim: int,
                hyper: Hyperparameters = Hyperparameters(), seed: int = 0) -> BanditPolicy:
    """Fresh policy; ``seed`` only matters for the network's weight init."""
    kwargs = hyper.for_algorithm(algorithm)
    if algorithm is Algorithm.ANN:
        kwargs["seed"] = seed
    return POLICIES[algorithm](n_arms, dim, **kwargs)


def policy_from_state(state: dict) -> BanditPolicy:
    algorithm = Algorithm(str(state["algorithm"]))
    return POLICIES[algorithm].from_state_dict(state)


__all__ = [
    "Adam", "Algorithm", "BanditPolicy", "Hyperparameters", "LinUCB", "MLPBandit",
    "RegressionTree", "TreeBandit", "best_split", "fit_tree", "make_policy", "policy_from_state",
]
