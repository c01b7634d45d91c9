"""Decision-tree contextual bandit: one regression tree per arm, epsilon-greedy, periodic refits."""

from __future__ import annotations

import math

import numpy as np

from trustcal.exceptions import ShapeError

LEAF = -1


class RegressionTree:
    """Binary regression tree stored as flat node arrays.

    Node ``i`` is a leaf when ``left[i] == -1``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to ``right[i]``.
    """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)
        # plain lists make the per-trial traversal several times faster than numpy scalars
        self._nodes = list(zip(self.feature.tolist(), self.threshold.tolist(),
                               self.left.tolist(), self.right.tolist(), self.value.tolist()))

    @classmethod
    def leaf(cls, value: float = 0.0) -> RegressionTree:
        return cls([LEAF], [0.0], [LEAF], [LEAF], [value])

    @property
    def n_nodes(self) -> int:
        return len(self._nodes)

    @property
    def depth(self) -> int:
        def walk(i):
            if self.left[i] == LEAF:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def leaf_index(self, x) -> int:
        nodes = self._nodes
        i = 0
        f, thr, left, right, _ = nodes[0]
        while left != LEAF:
            i = left if x[f] <= thr else right
            f, thr, left, right, _ = nodes[i]
        return i

    def predict(self, x) -> float:
        return self._nodes[self.leaf_index(x)][4]

    def structure(self) -> tuple:
        """Hashable view of the split structure (leaf values excluded)."""
        return (tuple(self.feature.tolist()), tuple(self.threshold.tolist()),
                tuple(self.left.tolist()), tuple(self.right.tolist()))

    def __eq__(self, other):
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return self.structure() == other.structure() and np.array_equal(self.value, other.value)


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustive variance-reduction split search.

    Candidates are midpoints between consecutive distinct sorted values of each
    feature, subject to both children holding at least ``min_leaf`` samples.
    Returns ``(feature, threshold, reduction)`` or ``None`` when no split
    reduces the squared error. Ties go to the lowest feature, then the lowest
    threshold.
    """
    n, d = X.shape
    if n < 2 * min_leaf or d == 0:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    total, total_sq = csum[-1, 0], csq[-1, 0]
    sse_total = total_sq - total * total / n

    # a split after sorted position i puts i samples on the left
    counts = np.arange(1, n)[:, None].astype(float)
    left_sum, left_sq = csum[:-1], csq[:-1]
    right_sum, right_sq = total - left_sum, total_sq - left_sq
    sse = (left_sq - left_sum**2 / counts) + (right_sq - right_sum**2 / (n - counts))
    gain = sse_total - sse

    valid = xs[:-1] < xs[1:]
    valid[: min_leaf - 1] = False
    valid[n - min_leaf:] = False
    gain = np.where(valid, gain, -np.inf)

    flat = gain.T.ravel()  # feature-major, so argmax prefers the lowest feature
    k = int(np.argmax(flat))
    best = flat[k]
    if not np.isfinite(best) or best <= 1e-12 * max(1.0, abs(sse_total)):
        return None
    f, pos = divmod(k, n - 1)
    threshold = 0.5 * (xs[pos, f] + xs[pos + 1, f])
    return int(f), float(threshold), float(best)


def fit_tree(X, y, max_depth: int = 6, min_leaf: int = 5) -> RegressionTree:
    """Grow a regression tree greedily by variance reduction."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        return RegressionTree.leaf(0.0)
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(value)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(y[idx])))
        if depth >= max_depth:
            return node
        split = best_split(X[idx], y[idx], min_leaf)
        if split is None:
            return node
        f, thr, _ = split
        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return RegressionTree(feature, threshold, left, right, value)


class TreeBandit:
    """Epsilon-greedy bandit over per-arm regression trees.

    Each arm keeps a buffer of every ``(x, r)`` observed for it. All trees are
    refit from their buffers every ``retrain_period`` updates, so tree structure
    and leaf values only change at those boundaries. Until every arm has at
    least one sample, ``select`` returns the lowest arm with an empty buffer.

    The exploration rate at trial ``t`` (1-based) is
    ``max(epsilon_floor, 1 / sqrt(t))`` unless a constant ``epsilon`` is given.
    """

    name = "tree"

    def __init__(self, n_arms: int, dim: int, retrain_period: int = 50, max_depth: int = 6,
                 min_leaf: int = 5, epsilon_floor: float = 0.01, epsilon: float | None = None):
        if retrain_period < 1:
            raise ValueError("retrain_period must be >= 1")
        if min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        self.n_arms = int(n_arms)
        self.dim = int(dim)
        self.retrain_period = int(retrain_period)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.epsilon_floor = float(epsilon_floor)
        self.epsilon = epsilon
        self.t = 0
        self._X: list[list[np.ndarray]] = [[] for _ in range(self.n_arms)]
        self._y: list[list[float]] = [[] for _ in range(self.n_arms)]
        self.trees = [RegressionTree.leaf() for _ in range(self.n_arms)]
        # buffer size each tree was last fit on; -1 forces a refit
        self._fitted = [-1] * self.n_arms

    def exploration_rate(self, t: int | None = None) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        t = self.t + 1 if t is None else t
        return max(self.epsilon_floor, 1.0 / math.sqrt(t))

    def buffer(self, arm: int) -> tuple[np.ndarray, np.ndarray]:
        if not self._y[arm]:
            return np.empty((0, self.dim)), np.empty(0)
        return np.vstack(self._X[arm]), np.array(self._y[arm])

    def predict(self, arm: int, x) -> float:
        return self.trees[arm].predict(x)

    def select(self, x, u: float = 1.0) -> int:
        if len(x) != self.dim:
            raise ShapeError(f"context has length {len(x)}, expected {self.dim}")
        for arm in range(self.n_arms):
            if not self._y[arm]:
                return arm
        eps = self.exploration_rate()
        if u < eps:
            return min(int(u / eps * self.n_arms), self.n_arms - 1)
        preds = [tree.predict(x) for tree in self.trees]
        return max(range(self.n_arms), key=lambda k: (preds[k], -k))

    def update(self, arm: int, x, r: float) -> None:
        self._X[arm].append(np.array(x, dtype=float))
        self._y[arm].append(float(r))
        self.t += 1
        if self.t % self.retrain_period == 0:
            self.retrain()

    def retrain(self) -> None:
        # fits are deterministic, so an arm with an unchanged buffer keeps its tree
        for arm in range(self.n_arms):
            size = len(self._y[arm])
            if size != self._fitted[arm]:
                self.trees[arm] = fit_tree(*self.buffer(arm), max_depth=self.max_depth,
                                           min_leaf=self.min_leaf)
                self._fitted[arm] = size

    def state_dict(self) -> dict:
        state = {
            "n_arms": self.n_arms, "dim": self.dim, "retrain_period": self.retrain_period,
            "max_depth": self.max_depth, "min_leaf": self.min_leaf,
            "epsilon_floor": self.epsilon_floor,
            "epsilon": np.nan if self.epsilon is None else self.epsilon, "t": self.t,
        }
        for arm, tree in enumerate(self.trees):
            X, y = self.buffer(arm)
            state[f"buffer_X_{arm}"] = X
            state[f"buffer_y_{arm}"] = y
            for key in ("feature", "threshold", "left", "right", "value"):
                state[f"tree_{key}_{arm}"] = getattr(tree, key).copy()
        return state

    @classmethod
    def from_state_dict(cls, state: dict) -> TreeBandit:
        eps = float(state["epsilon"])
        policy = cls(int(state["n_arms"]), int(state["dim"]), int(state["retrain_period"]),
                     int(state["max_depth"]), int(state["min_leaf"]), float(state["epsilon_floor"]),
                     None if math.isnan(eps) else eps)
        policy.t = int(state["t"])
        for arm in range(policy.n_arms):
            X = np.asarray(state[f"buffer_X_{arm}"], dtype=float)
            policy._X[arm] = [row.copy() for row in X]
            policy._y[arm] = [float(v) for v in state[f"buffer_y_{arm}"]]
            policy.trees[arm] = RegressionTree(*(state[f"tree_{key}_{arm}"] for key in
                                                 ("feature", "threshold", "left", "right", "value")))
        return policy
