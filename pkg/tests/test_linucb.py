import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustcal.bandits import LinUCB
from trustcal.exceptions import ShapeError


def oracle_score(A, b, x, alpha):
    """UCB from a dense inverse of the design matrix."""
    A_inv = np.linalg.inv(A)
    return (A_inv @ b) @ x + alpha * math.sqrt(x @ A_inv @ x)


def ridge(X, r):
    """Ridge solution with identity prior: (I + X^T X)^-1 X^T r."""
    d = X.shape[1]
    return np.linalg.solve(np.eye(d) + X.T @ X, X.T @ r)


def random_policy(rng, d, K, steps, alpha=1.0):
    policy = LinUCB(K, d, alpha)
    history = {k: ([], []) for k in range(K)}
    for _ in range(steps):
        arm = int(rng.integers(K))
        x = rng.normal(size=d)
        r = float(rng.normal())
        policy.update(arm, x, r)
        history[arm][0].append(x)
        history[arm][1].append(r)
    return policy, history


def test_fresh_state_score_is_norm():
    policy = LinUCB(2, 2)
    assert policy.ucb_score(0, [1.0, 0.0]) == 1.0
    assert policy.select([0.3, -0.2]) == 0


def test_single_update_by_hand():
    policy = LinUCB(2, 2)
    policy.update(0, np.array([1.0, 0.0]), 1.0)
    np.testing.assert_allclose(policy.A[0], np.diag([2.0, 1.0]))
    np.testing.assert_allclose(policy.b[0], [1.0, 0.0])
    np.testing.assert_allclose(policy.theta[0], [0.5, 0.0])
    # 0.5 + sqrt(0.5)
    assert policy.ucb_score(0, [1.0, 0.0]) == pytest.approx(1.2071067811865475, abs=1e-12)
    np.testing.assert_array_equal(policy.A[1], np.eye(2))


def test_zero_reward_leaves_b_and_shrinks_theta():
    policy = LinUCB(1, 2)
    x = np.array([1.0, 0.0])
    policy.update(0, x, 1.0)
    before = policy.theta[0].copy()
    policy.update(0, x, 0.0)
    np.testing.assert_array_equal(policy.b[0], [1.0, 0.0])
    assert np.linalg.norm(policy.theta[0]) < np.linalg.norm(before)


def test_matches_dense_inverse_oracle():
    rng = np.random.default_rng(7)
    policy, history = random_policy(rng, d=4, K=2, steps=20)
    for arm in range(2):
        X = np.array(history[arm][0]).reshape(-1, 4)
        A = np.eye(4) + X.T @ X
        b = X.T @ np.array(history[arm][1]) if len(X) else np.zeros(4)
        for _ in range(10):
            x = rng.normal(size=4)
            assert abs(policy.ucb_score(arm, x) - oracle_score(A, b, x, 1.0)) < 1e-9


def test_theta_is_ridge_solution():
    rng = np.random.default_rng(3)
    policy, history = random_policy(rng, d=5, K=1, steps=100)
    X, r = np.array(history[0][0]), np.array(history[0][1])
    assert np.max(np.abs(policy.theta[0] - ridge(X, r))) < 1e-8


def test_latest_theta_variant_uses_only_last_observation():
    policy = LinUCB(1, 2, theta_update="latest")
    policy.update(0, np.array([1.0, 0.0]), 1.0)
    policy.update(0, np.array([0.0, 1.0]), 2.0)
    A = np.eye(2) + np.diag([1.0, 1.0])
    np.testing.assert_allclose(policy.theta[0], np.linalg.solve(A, [0.0, 2.0]))


def test_selection_flips_once_with_alpha():
    # arm 1 trained 10 times on x=(1,0) with r=1: theta=10/11, width=1/sqrt(11);
    # arm 0 untouched scores alpha. The crossover is alpha* = (10/11) / (1 - 1/sqrt(11)).
    x = np.array([1.0, 0.0])
    crossover = (10 / 11) / (1 - 1 / math.sqrt(11))
    picks = []
    for alpha in np.linspace(0.1, 4.0, 79):
        policy = LinUCB(2, 2, alpha=float(alpha))
        for _ in range(10):
            policy.update(1, x, 1.0)
        picks.append(policy.select(x))
        assert picks[-1] == (0 if alpha > crossover else 1)
    assert picks[0] == 1 and picks[-1] == 0
    assert sum(a != b for a, b in zip(picks, picks[1:])) == 1


def test_selection_matches_oracle_argmax_k3():
    rng = np.random.default_rng(11)
    policy, history = random_policy(rng, d=3, K=3, steps=30, alpha=0.7)
    dense = []
    for arm in range(3):
        X = np.array(history[arm][0]).reshape(-1, 3)
        dense.append((np.eye(3) + X.T @ X, X.T @ np.array(history[arm][1]) if len(X) else np.zeros(3)))
    for _ in range(1000):
        x = rng.normal(size=3)
        scores = [oracle_score(A, b, x, 0.7) for A, b in dense]
        assert policy.select(x) == int(np.argmax(scores))


def test_dimension_mismatch():
    policy = LinUCB(2, 3)
    with pytest.raises(ShapeError):
        policy.select([1.0, 2.0])
    with pytest.raises(ShapeError):
        policy.ucb_score(0, [1.0])


def test_zero_context_is_legal():
    policy = LinUCB(2, 3)
    policy.update(1, np.zeros(3), 5.0)
    np.testing.assert_array_equal(policy.A[1], np.eye(3))
    assert policy.ucb_score(1, np.zeros(3)) == 0.0


updates = st.lists(
    st.tuples(st.integers(0, 1), st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2)),
    min_size=1, max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(updates)
def test_design_matrix_stays_spd(seq):
    policy = LinUCB(2, 3)
    for arm, x, r in seq:
        policy.update(arm, np.array(x), r)
    for arm in range(2):
        np.testing.assert_allclose(policy.A[arm], policy.A[arm].T)
        np.linalg.cholesky(policy.A[arm])
        np.testing.assert_allclose(policy.A_inv[arm] @ policy.A[arm], np.eye(3), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(updates, st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_exploration_width_non_increasing(seq, direction):
    x = np.array(direction)
    policy = LinUCB(2, 3)
    width = [x @ policy.A_inv[k] @ x for k in range(2)]
    for arm, z, r in seq:
        policy.update(arm, np.array(z), r)
        new = x @ policy.A_inv[arm] @ x
        assert new <= width[arm] + 1e-9
        width[arm] = new


def test_snapshot_round_trip():
    rng = np.random.default_rng(0)
    policy, _ = random_policy(rng, 3, 2, 15)
    clone = LinUCB.from_state_dict(policy.state_dict())
    x = rng.normal(size=3)
    np.testing.assert_array_equal(policy.scores(x), clone.scores(x))
