"""Generic finite average-cost MDP machinery: relative value iteration and
policy evaluation.

The transition kernel is stored per action as fixed-width (successor index,
probability) arrays, which keeps the Bellman sweep fully vectorized. Both the
retransmission MDPs and the random instances used for solver validation fit
this shape.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ModelError

__all__ = ["FiniteAverageCostMdp", "Policy", "relative_value_iteration", "policy_average_cost"]


@dataclass(frozen=True, eq=False)
class FiniteAverageCostMdp:
    """costs[s, a]; transitions[a] = (idx, prob) arrays of shape (S, K_a);
    available[s, a] masks actions that are forbidden at a state."""

    costs: np.ndarray
    transitions: list
    available: np.ndarray
    ref: int = 0

    @property
    def n_states(self) -> int:
        return self.costs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.costs.shape[1]

    def validate_kernel(self, tol: float = 1e-12):
        """Check that every available (state, action) row sums to one."""
        for a, (_, prob) in enumerate(self.transitions):
            rows = self.available[:, a]
            sums = prob[rows].sum(axis=1)
            worst = np.max(np.abs(sums - 1.0)) if rows.any() else 0.0
            if worst > tol:
                raise ModelError(f"action {a} kernel rows deviate from 1 by {worst:.3e}")

    def row(self, s: int, a: int):
        idx, prob = self.transitions[a]
        return idx[s], prob[s]


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic state -> action table plus the solve that produced it."""

    actions: np.ndarray
    states: tuple
    zeta: float
    span: float
    iterations: int
    converged: bool
    cost_mode: str = "mse"
    kind: str = "static"
    params: dict = field(default_factory=dict)

    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    def action_of(self, state) -> int:
        return int(self.actions[self.index()[state]])


def relative_value_iteration(
    mdp: FiniteAverageCostMdp,
    tol: float = 1e-9,
    max_iters: int = 100_000,
    patience: int = 500,
):
    """Span-seminorm relative value iteration for the long-run average cost.

    Stops when the span of successive value differences drops below tol, or
    when the span stops improving for `patience` sweeps (the float64 noise
    floor for value functions spanning many orders of magnitude). The
    midpoint of the final difference bounds estimates the gain; the span is
    its certified error bar.

    Returns (actions, zeta, span, iterations, converged).
    """
    n, n_actions = mdp.n_states, mdp.n_actions
    if not mdp.available.any(axis=1).all():
        raise ValueError("every state needs at least one available action")
    v = np.zeros(n)
    q = np.empty((n, n_actions))
    best_span = np.inf
    stall = 0
    converged = False
    lo = hi = 0.0
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        for a in range(n_actions):
            idx, prob = mdp.transitions[a]
            q[:, a] = mdp.costs[:, a] + np.einsum("sk,sk->s", prob, v[idx])
        q[~mdp.available] = np.inf
        tv = q.min(axis=1)
        diff = tv - v
        lo, hi = float(diff.min()), float(diff.max())
        span = hi - lo
        v = tv - tv[mdp.ref]
        if span < tol:
            converged = True
            break
        if span < best_span * (1.0 - 1e-6):
            best_span = span
            stall = 0
        else:
            stall += 1
            if stall >= patience:
                break
    else:
        raise ConvergenceError(
            f"relative value iteration did not converge within {max_iters} sweeps "
            f"(final span {hi - lo:.3e})"
        )
    # Greedy actions off the final Q table. Lower-numbered actions win ties;
    # the tie width scales with the Q magnitude because absolute 1e-12 is
    # below float resolution once costs reach ~1e4.
    for a in range(n_actions):
        idx, prob = mdp.transitions[a]
        q[:, a] = mdp.costs[:, a] + np.einsum("sk,sk->s", prob, v[idx])
    q[~mdp.available] = np.inf
    actions = np.zeros(n, dtype=np.int8)
    best = q[:, 0].copy()
    for a in range(1, n_actions):
        finite = np.isfinite(q[:, a])
        tie = 1e-12 + 1e-9 * np.maximum(np.abs(best), np.where(finite, np.abs(q[:, a]), 0.0))
        better = q[:, a] < best - tie
        actions[better] = a
        best = np.where(better, q[:, a], best)
    zeta = (lo + hi) / 2.0
    return actions, float(zeta), float(hi - lo), iterations, converged


def policy_average_cost(mdp: FiniteAverageCostMdp, actions) -> float:
    """Exact long-run average cost of a fixed policy.

    Restricts to the states reachable from the reference state, solves the
    stationary distribution of the induced chain there, and averages the
    one-stage costs. Assumes the reachable chain has a single recurrent class.
    """
    actions = np.asarray(actions, dtype=int)
    if any(not mdp.available[s, actions[s]] for s in range(mdp.n_states)):
        raise ValueError("policy selects an unavailable action")
    reachable = _reachable_from(mdp, actions, mdp.ref)
    order = sorted(reachable)
    pos = {s: i for i, s in enumerate(order)}
    m = len(order)
    p = np.zeros((m, m))
    cost = np.empty(m)
    for s in order:
        i = pos[s]
        idx, prob = mdp.row(s, actions[s])
        for j, pr in zip(idx, prob):
            if pr > 0.0:
                p[pos[int(j)], i] += pr
        cost[i] = mdp.costs[s, actions[s]]
    a = p - np.eye(m)
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        dist = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        dist, *_ = np.linalg.lstsq(a, b, rcond=None)
    dist = np.clip(dist, 0.0, None)
    dist = dist / dist.sum()
    return float(dist @ cost)


def _reachable_from(mdp: FiniteAverageCostMdp, actions, start: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        idx, prob = mdp.row(s, actions[s])
        for j, pr in zip(idx, prob):
            j = int(j)
            if pr > 0.0 and j not in seen:
                seen.add(j)
                stack.append(j)
    return seen
