"""Disjoint LinUCB: one ridge-regression payoff model per arm with an upper confidence bonus."""

from __future__ import annotations

import numpy as np

from trustcal.exceptions import ShapeError

THETA_UPDATES = ("accumulate", "latest")


class LinUCB:
    """LinUCB with per-arm design matrices kept as Sherman-Morrison inverses.

    Parameters
    ----------
    n_arms : int
        Number of arms K.
    dim : int
        Context dimension d.
    alpha : float
        Weight on the confidence term of the UCB score.
    theta_update : {"accumulate", "latest"}
        ``"accumulate"`` keeps ``b = sum(x * r)`` so that ``theta = A^-1 b`` is the
        ridge-regression solution. ``"latest"`` sets ``theta = A^-1 x r`` from the
        most recent observation only.
    """

    name = "linucb"

    def __init__(self, n_arms: int, dim: int, alpha: float = 1.0, theta_update: str = "accumulate"):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if theta_update not in THETA_UPDATES:
            raise ValueError(f"theta_update must be one of {THETA_UPDATES}, got {theta_update!r}")
        self.n_arms = int(n_arms)
        self.dim = int(dim)
        self.alpha = float(alpha)
        self.theta_update = theta_update
        self.A = np.tile(np.eye(self.dim), (self.n_arms, 1, 1))
        self.A_inv = self.A.copy()
        self.b = np.zeros((self.n_arms, self.dim))
        self.theta = np.zeros((self.n_arms, self.dim))
        self.counts = np.zeros(self.n_arms, dtype=np.int64)

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ShapeError(f"context has shape {x.shape}, expected ({self.dim},)")
        return x

    def scores(self, x) -> np.ndarray:
        """UCB score of every arm for context ``x``."""
        x = self._check(x)
        mean = self.theta @ x
        width = np.einsum("i,kij,j->k", x, self.A_inv, x)
        return mean + self.alpha * np.sqrt(np.maximum(width, 0.0))

    def ucb_score(self, arm: int, x) -> float:
        x = self._check(x)
        if not 0 <= arm < self.n_arms:
            raise ShapeError(f"arm {arm} out of range for {self.n_arms} arms")
        width = x @ self.A_inv[arm] @ x
        return float(self.theta[arm] @ x + self.alpha * np.sqrt(max(width, 0.0)))

    def select(self, x, u: float | None = None) -> int:
        # np.argmax returns the first maximum, i.e. ties go to the lowest index
        return int(np.argmax(self.scores(x)))

    def update(self, arm: int, x, r: float) -> None:
        x = self._check(x)
        A_inv = self.A_inv[arm]
        Ax = A_inv @ x
        denom = 1.0 + x @ Ax
        A_inv -= np.outer(Ax, Ax) / denom
        # keep the inverse exactly symmetric against rounding drift
        self.A_inv[arm] = 0.5 * (A_inv + A_inv.T)
        self.A[arm] += np.outer(x, x)
        if self.theta_update == "accumulate":
            self.b[arm] += r * x
        else:
            self.b[arm] = r * x
        self.theta[arm] = self.A_inv[arm] @ self.b[arm]
        self.counts[arm] += 1

    def state_dict(self) -> dict:
        return {
            "n_arms": self.n_arms,
            "dim": self.dim,
            "alpha": self.alpha,
            "theta_update": self.theta_update,
            "A": self.A.copy(),
            "A_inv": self.A_inv.copy(),
            "b": self.b.copy(),
            "theta": self.theta.copy(),
            "counts": self.counts.copy(),
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> LinUCB:
        policy = cls(int(state["n_arms"]), int(state["dim"]), float(state["alpha"]), str(state["theta_update"]))
        for key in ("A", "A_inv", "b", "theta", "counts"):
            setattr(policy, key, np.array(state[key]))
        return policy
