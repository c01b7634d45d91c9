"""Neural contextual bandit: one hidden ReLU layer, one output head per arm, online Adam.

Only the chosen arm's reward is observed, so the loss for a step is
``(out[arm] - r) ** 2``. Gradients reach the shared hidden layer and the chosen
head only; the other heads and their Adam moments are left untouched.
"""

from __future__ import annotations

import math

import numpy as np

from trustcal.exceptions import ShapeError
from trustcal.rng import SplitMix64


class Adam:
    """Bias-corrected Adam over one flat parameter vector, with per-slot step counts.

    ``step(grad, mask)`` advances only the entries where ``mask`` is true, each
    with its own step counter, so entries that receive no gradient keep both
    their value and their moment estimates.
    """

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.steps = np.zeros(size)

    def step(self, params: np.ndarray, grad: np.ndarray, idx=slice(None)) -> None:
        g = grad[idx]
        m = self.m[idx] = self.beta1 * self.m[idx] + (1 - self.beta1) * g
        v = self.v[idx] = self.beta2 * self.v[idx] + (1 - self.beta2) * g * g
        t = self.steps[idx] = self.steps[idx] + 1
        m_hat = m / (1 - self.beta1**t)
        v_hat = v / (1 - self.beta2**t)
        params[idx] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class MLPBandit:
    """Epsilon-greedy bandit over a d -> hidden (ReLU) -> K network.

    Parameters live in one flat vector; ``W1`` (hidden x d), ``c1`` (hidden),
    ``W2`` (K x hidden) and ``c2`` (K) are views into it. Weights start
    Glorot-uniform from the given seed; biases start at zero.
    """

    name = "ann"

    def __init__(self, n_arms: int, dim: int, hidden: int = 15, lr: float = 1e-3, seed: int = 0,
                 epsilon_floor: float = 0.01, epsilon: float | None = None,
                 betas: tuple[float, float] = (0.9, 0.999), adam_eps: float = 1e-8):
        self.n_arms = int(n_arms)
        self.dim = int(dim)
        self.hidden = int(hidden)
        self.epsilon_floor = float(epsilon_floor)
        self.epsilon = epsilon
        self.seed = int(seed)
        self.t = 0
        H, d, K = self.hidden, self.dim, self.n_arms
        self._shapes = [("W1", (H, d)), ("c1", (H,)), ("W2", (K, H)), ("c2", (K,))]
        self.params = np.zeros(H * d + H + K * H + K)
        self._bind_views()
        gen = SplitMix64(self.seed)
        lim1 = math.sqrt(6.0 / (d + H))
        lim2 = math.sqrt(6.0 / (H + K))
        self.W1[...] = gen.uniform(-lim1, lim1, H * d).reshape(H, d)
        self.W2[...] = gen.uniform(-lim2, lim2, K * H).reshape(K, H)
        self.optimizer = Adam(self.params.size, lr, betas[0], betas[1], adam_eps)
        # trunk (W1, c1) plus the chosen arm's W2 row and c2 entry
        trunk = np.arange(H * d + H)
        off_w2, off_c2 = H * d + H, H * d + H + K * H
        self._update_idx = [
            np.concatenate([trunk, off_w2 + k * H + np.arange(H), [off_c2 + k]]) for k in range(K)
        ]

    def _bind_views(self):
        offset = 0
        for name, shape in self._shapes:
            size = int(np.prod(shape))
            setattr(self, name, self.params[offset:offset + size].reshape(shape))
            offset += size

    @property
    def lr(self) -> float:
        return self.optimizer.lr

    def exploration_rate(self, t: int | None = None) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        t = self.t + 1 if t is None else t
        return max(self.epsilon_floor, 1.0 / math.sqrt(t))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ShapeError(f"context has shape {x.shape}, expected ({self.dim},)")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check(x)
        return self.W2 @ np.maximum(0.0, self.W1 @ x + self.c1) + self.c2

    def loss_and_grad(self, arm: int, x, r: float) -> tuple[float, np.ndarray]:
        """Squared error on head ``arm`` and its gradient w.r.t. the flat parameters."""
        x = self._check(x)
        H, d, K = self.hidden, self.dim, self.n_arms
        z = self.W1 @ x + self.c1
        h = np.maximum(0.0, z)
        err = self.W2[arm] @ h + self.c2[arm] - r
        grad = np.zeros_like(self.params)
        g_out = 2.0 * err
        g_z = g_out * self.W2[arm] * (z > 0)
        grad[: H * d] = np.outer(g_z, x).ravel()
        grad[H * d: H * d + H] = g_z
        off_w2 = H * d + H
        grad[off_w2 + arm * H: off_w2 + (arm + 1) * H] = g_out * h
        grad[off_w2 + K * H + arm] = g_out
        return float(err * err), grad

    def select(self, x, u: float = 1.0) -> int:
        eps = self.exploration_rate()
        if u < eps:
            self._check(x)
            return min(int(u / eps * self.n_arms), self.n_arms - 1)
        return int(np.argmax(self.forward(x)))

    def update(self, arm: int, x, r: float) -> None:
        _, grad = self.loss_and_grad(arm, x, r)
        self.optimizer.step(self.params, grad, self._update_idx[arm])
        self.t += 1

    def state_dict(self) -> dict:
        return {
            "n_arms": self.n_arms, "dim": self.dim, "hidden": self.hidden, "lr": self.lr,
            "seed": self.seed, "epsilon_floor": self.epsilon_floor,
            "epsilon": np.nan if self.epsilon is None else self.epsilon, "t": self.t,
            "beta1": self.optimizer.beta1, "beta2": self.optimizer.beta2,
            "adam_eps": self.optimizer.eps,
            "params": self.params.copy(), "adam_m": self.optimizer.m.copy(),
            "adam_v": self.optimizer.v.copy(), "adam_steps": self.optimizer.steps.copy(),
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> MLPBandit:
        eps = float(state["epsilon"])
        policy = cls(int(state["n_arms"]), int(state["dim"]), int(state["hidden"]), float(state["lr"]),
                     int(state["seed"]), float(state["epsilon_floor"]),
                     None if math.isnan(eps) else eps,
                     (float(state["beta1"]), float(state["beta2"])), float(state["adam_eps"]))
        policy.t = int(state["t"])
        policy.params[...] = state["params"]
        policy.optimizer.m[...] = state["adam_m"]
        policy.optimizer.v[...] = state["adam_v"]
        policy.optimizer.steps[...] = state["adam_steps"]
        return policy
