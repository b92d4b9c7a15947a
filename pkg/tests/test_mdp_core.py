import itertools

import numpy as np
import pytest

from harqest import (
    ConvergenceError,
    FiniteAverageCostMdp,
    ModelError,
    policy_average_cost,
    relative_value_iteration,
)


def random_mdp(seed, max_states=12, n_actions=2):
    """Dense random MDP with strictly positive kernels (irreducible, aperiodic)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, max_states + 1))
    costs = rng.uniform(0.0, 10.0, size=(n, n_actions))
    transitions = []
    for _ in range(n_actions):
        rows = rng.uniform(0.05, 1.0, size=(n, n))
        rows /= rows.sum(axis=1, keepdims=True)
        idx = np.tile(np.arange(n), (n, 1))
        transitions.append((idx, rows))
    available = np.ones((n, n_actions), dtype=bool)
    return FiniteAverageCostMdp(costs=costs, transitions=transitions, available=available, ref=0)


def stationary_gain_oracle(mdp, actions):
    """Average cost via the stationary distribution of the induced chain,
    solved as an eigenproblem (independent of the package's linear-solve route)."""
    n = mdp.n_states
    p = np.zeros((n, n))
    cost = np.empty(n)
    for s in range(n):
        idx, prob = mdp.row(s, actions[s])
        for j, pr in zip(idx, prob):
            p[s, int(j)] += pr
        cost[s] = mdp.costs[s, actions[s]]
    eigvals, eigvecs = np.linalg.eig(p.T)
    k = int(np.argmin(np.abs(eigvals - 1.0)))
    pi = np.real(eigvecs[:, k])
    pi = np.abs(pi) / np.abs(pi).sum()
    return float(pi @ cost)


def brute_force_optimum(mdp):
    """Enumerate every deterministic policy; exact stationary-cost evaluation."""
    n = mdp.n_states
    best_actions, best_gain = None, np.inf
    for actions in itertools.product(range(mdp.n_actions), repeat=n):
        if not all(mdp.available[s, a] for s, a in enumerate(actions)):
            continue
        gain = stationary_gain_oracle(mdp, actions)
        if gain < best_gain:
            best_actions, best_gain = actions, gain
    return np.array(best_actions), best_gain


class TestRelativeValueIteration:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        mdp = random_mdp(seed, max_states=7)
        actions, zeta, span, iterations, converged = relative_value_iteration(mdp, tol=1e-11)
        oracle_actions, oracle_gain = brute_force_optimum(mdp)
        assert converged
        assert zeta == pytest.approx(oracle_gain, abs=1e-7)
        np.testing.assert_array_equal(actions, oracle_actions)

    def test_reference_state_invariance(self):
        mdp = random_mdp(99, max_states=8)
        _, zeta0, span0, _, _ = relative_value_iteration(mdp, tol=1e-11)
        alt = FiniteAverageCostMdp(
            costs=mdp.costs,
            transitions=mdp.transitions,
            available=mdp.available,
            ref=mdp.n_states - 1,
        )
        _, zeta1, span1, _, _ = relative_value_iteration(alt, tol=1e-11)
        assert abs(zeta0 - zeta1) <= 2.0 * max(span0, span1) + 1e-9

    def test_deterministic(self):
        mdp = random_mdp(5)
        first = relative_value_iteration(mdp)
        second = relative_value_iteration(mdp)
        np.testing.assert_array_equal(first[0], second[0])
        assert first[1:] == second[1:]

    def test_max_iters_exceeded_raises(self):
        mdp = random_mdp(1)
        with pytest.raises(ConvergenceError):
            relative_value_iteration(mdp, tol=1e-15, max_iters=2, patience=10_000)


class TestPolicyAverageCost:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_eig_oracle(self, seed):
        mdp = random_mdp(40 + seed)
        rng = np.random.default_rng(seed)
        actions = rng.integers(0, mdp.n_actions, size=mdp.n_states)
        assert policy_average_cost(mdp, actions) == pytest.approx(
            stationary_gain_oracle(mdp, actions), abs=1e-9
        )

    def test_handles_transient_states(self):
        # two states; action 0 moves to state 1 and stays: state 0 is transient
        costs = np.array([[5.0, 5.0], [1.0, 1.0]])
        idx = np.array([[1, 1], [1, 1]])
        prob = np.array([[1.0, 0.0], [1.0, 0.0]])
        mdp = FiniteAverageCostMdp(
            costs=costs, transitions=[(idx, prob), (idx, prob)], available=np.ones((2, 2), bool)
        )
        assert policy_average_cost(mdp, [0, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_unavailable_action(self):
        mdp = random_mdp(3)
        available = mdp.available.copy()
        available[0, 1] = False
        restricted = FiniteAverageCostMdp(
            costs=mdp.costs, transitions=mdp.transitions, available=available, ref=0
        )
        actions = np.ones(mdp.n_states, dtype=int)
        with pytest.raises(ValueError):
            policy_average_cost(restricted, actions)


class TestKernelValidation:
    def test_accepts_valid(self):
        random_mdp(2).validate_kernel()

    def test_rejects_deficient_row(self):
        mdp = random_mdp(2)
        idx, prob = mdp.transitions[0]
        broken = prob.copy()
        broken[0] *= 0.5
        bad = FiniteAverageCostMdp(
            costs=mdp.costs,
            transitions=[(idx, broken), mdp.transitions[1]],
            available=mdp.available,
        )
        with pytest.raises(ModelError):
            bad.validate_kernel()
