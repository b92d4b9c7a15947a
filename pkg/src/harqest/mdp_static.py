"""Average-cost MDP for the constant-gain channel: kernel, solver, stability
and structure checks, the myopic rule, and the perfect-retransmission closed
form.

States are pairs (r, q): r counts the consecutive attempts of the pending
round, q is the age of the freshest delivered estimate, and r <= q always.
Action 0 transmits a fresh estimate, action 1 retransmits the pending one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .harq_model import HarqModel, HistoryCounter, conditional_error_prob
from .lti_estimation import CostLadder
from .mdp_core import FiniteAverageCostMdp, Policy, relative_value_iteration

__all__ = [
    "StabilityReport",
    "check_stability_static",
    "StaticMdp",
    "build_static_mdp",
    "build_static_mdp_from_error_probs",
    "solve_rvi",
    "SwitchingReport",
    "verify_switching",
    "myopic_policy",
    "high_snr_zeta_static",
    "high_snr_optimal_static",
    "HighSnrStaticResult",
]

# Treat the retransmission as giving no reliability edge below this gap.
_RELIABILITY_TIE = 1e-15


@dataclass(frozen=True)
class StabilityReport:
    """Sufficient-condition check: product < 1 guarantees a bounded-MSE policy
    exists; product >= 1 only means the guarantee is silent."""

    product: float
    stable: bool

    @property
    def margin(self) -> float:
        return 1.0 - self.product


def check_stability_static(lambda0: float, rho_sq_a: float) -> StabilityReport:
    """Worst retransmission error times the squared spectral radius of A."""
    product = float(lambda0) * float(rho_sq_a)
    return StabilityReport(product=product, stable=product < 1.0)


@dataclass(frozen=True, eq=False)
class StaticMdp:
    """Truncated (r, q) grid with its kernel, costs, and error-probability table."""

    core: FiniteAverageCostMdp
    states: tuple
    index: dict
    g_table: dict
    ladder: CostLadder
    r_max: int
    q_max: int
    cost_mode: str
    gain: float = float("nan")


def build_static_mdp_from_error_probs(
    g_table: dict,
    ladder: CostLadder,
    r_max: int,
    q_max: int,
    cost_mode: str = "mse",
    gain: float = float("nan"),
) -> StaticMdp:
    """Assemble the truncated MDP from an explicit attempt -> error-probability map.

    g_table[r] is the error probability of the r-th consecutive attempt;
    entries 1..r_max are required. Failure transitions clamp q at q_max, and
    action 1 is unavailable at r = r_max so the kernel stays closed.
    """
    if r_max < 2:
        raise ConfigError("r_max must be at least 2")
    if q_max < r_max:
        raise ConfigError("q_max must be at least r_max")
    if cost_mode not in ("mse", "delay"):
        raise ConfigError(f"cost_mode must be 'mse' or 'delay', got {cost_mode!r}")
    missing = [r for r in range(1, r_max + 1) if r not in g_table]
    if missing:
        raise ConfigError(f"g_table is missing attempts {missing}")
    ladder = ladder.extended(q_max)

    states = tuple((r, q) for r in range(1, r_max + 1) for q in range(r, q_max + 1))
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    idx0 = np.zeros((n, 2), dtype=np.int64)
    prob0 = np.zeros((n, 2))
    idx1 = np.zeros((n, 2), dtype=np.int64)
    prob1 = np.zeros((n, 2))
    available = np.zeros((n, 2), dtype=bool)
    available[:, 0] = True
    g1 = g_table[1]
    for s, (r, q) in enumerate(states):
        q_fail = min(q + 1, q_max)
        idx0[s] = (index[(1, 1)], index[(1, q_fail)])
        prob0[s] = (1.0 - g1, g1)
        if r < r_max:
            g_next = g_table[r + 1]
            idx1[s] = (index[(r + 1, r + 1)], index[(r + 1, q_fail)])
            prob1[s] = (1.0 - g_next, g_next)
            available[s, 1] = True
    if cost_mode == "mse":
        stage = np.array([ladder.trace(q) for (_, q) in states])
    else:
        stage = np.array([float(q) for (_, q) in states])
    costs = np.stack([stage, stage], axis=1)
    core = FiniteAverageCostMdp(
        costs=costs,
        transitions=[(idx0, prob0), (idx1, prob1)],
        available=available,
        ref=index[(1, 1)],
    )
    return StaticMdp(
        core=core,
        states=states,
        index=index,
        g_table=dict(g_table),
        ladder=ladder,
        r_max=r_max,
        q_max=q_max,
        cost_mode=cost_mode,
        gain=gain,
    )


def build_static_mdp(
    harq: HarqModel,
    gain: float,
    ladder: CostLadder,
    r_max: int,
    q_max: int,
    cost_mode: str = "mse",
) -> StaticMdp:
    """Truncated MDP with error probabilities taken from the link model."""
    g_table = {}
    for r in range(1, r_max + 1):
        history = HistoryCounter(counts=(r - 1,), gains=(float(gain),))
        g_table[r] = conditional_error_prob(harq, history, float(gain))
    return build_static_mdp_from_error_probs(
        g_table, ladder, r_max, q_max, cost_mode, gain=float(gain)
    )


def solve_rvi(mdp: StaticMdp, tol: float = 1e-9, max_iters: int = 100_000) -> Policy:
    """Relative value iteration with reference state (1, 1)."""
    actions, zeta, span, iterations, converged = relative_value_iteration(
        mdp.core, tol=tol, max_iters=max_iters
    )
    return Policy(
        actions=actions,
        states=mdp.states,
        zeta=zeta,
        span=span,
        iterations=iterations,
        converged=converged,
        cost_mode=mdp.cost_mode,
        kind="static",
        params={"r_max": mdp.r_max, "q_max": mdp.q_max},
    )


@dataclass(frozen=True)
class SwitchingReport:
    passed: bool
    violations: tuple


def verify_switching(policy: Policy) -> SwitchingReport:
    """Check the threshold structure on the (r, q) grid.

    (i) action 0 at (r, q) forces action 0 at every (r + z, q);
    (ii) action 1 at (r, q) forces action 1 at every (r, q + z).
    Checking immediate neighbors covers all z because the grid rows and
    columns are contiguous.
    """
    index = policy.index()
    violations = []
    for s, (r, q) in enumerate(policy.states):
        a = policy.actions[s]
        up_r = index.get((r + 1, q))
        if a == 0 and up_r is not None and policy.actions[up_r] != 0:
            violations.append(((r, q), (r + 1, q)))
        up_q = index.get((r, q + 1))
        if a == 1 and up_q is not None and policy.actions[up_q] != 1:
            violations.append(((r, q), (r, q + 1)))
    return SwitchingReport(passed=not violations, violations=tuple(violations))


def myopic_policy(mdp: StaticMdp) -> Policy:
    """Closed-form one-step-lookahead policy: no iteration, no value function.

    Transmit fresh exactly when the expected next-slot cost of doing so is no
    worse than retransmitting; with no reliability edge the comparison
    degenerates and fresh wins. Needs the cost ladder up to q_max + 1.
    """
    ladder = mdp.ladder.extended(mdp.q_max + 1)
    g1 = mdp.g_table[1]
    c1 = ladder.trace(1)
    actions = np.zeros(len(mdp.states), dtype=np.int8)
    for s, (r, q) in enumerate(mdp.states):
        if r >= mdp.r_max:
            continue
        g_next = mdp.g_table[r + 1]
        edge = g1 - g_next
        if abs(edge) < _RELIABILITY_TIE:
            continue
        threshold = ((1.0 - g_next) * ladder.trace(r + 1) - (1.0 - g1) * c1) / edge
        actions[s] = 0 if ladder.trace(q + 1) <= threshold else 1
    return Policy(
        actions=actions,
        states=mdp.states,
        zeta=float("nan"),
        span=float("nan"),
        iterations=0,
        converged=True,
        cost_mode="mse",
        kind="static",
        params={"r_max": mdp.r_max, "q_max": mdp.q_max, "rule": "myopic"},
    )


def high_snr_zeta_static(ladder: CostLadder, lambda_prime0: float, theta: int) -> float:
    """Long-run average MSE of the threshold-theta policy when retransmissions
    always succeed and a fresh transmission fails with probability lambda_prime0.

    Closed form of the stationary distribution of the reduced chain
    {(2,2)} + {(1,q)}: the threshold policy retransmits only at r = 1,
    q > theta, and such a retransmission lands in (2, 2).
    """
    if theta < 1:
        raise ValueError("theta must be at least 1")
    lam = float(lambda_prime0)
    if not 0.0 <= lam < 1.0:
        raise ValueError("lambda_prime0 must lie in [0, 1)")
    ladder = ladder.extended(max(theta + 1, 3))
    c = ladder.trace
    if theta == 1:
        return ((1 - lam) * c(1) + (2 * lam - lam * lam) * c(2) + lam * lam * c(3)) / (1 + lam)
    numerator = sum(c(i) * lam ** (i - 1) for i in range(1, theta + 2)) - c(1) * lam ** (theta - 1)
    denominator = 1.0 - lam ** (theta - 1) + lam ** theta - lam ** (theta + 1)
    return (1 - lam) * numerator / denominator


@dataclass(frozen=True)
class HighSnrStaticResult:
    theta_star: int
    zeta_star: float
    zetas: tuple  # zeta(theta) for theta = 1..theta_max


def high_snr_optimal_static(
    ladder: CostLadder, lambda_prime0: float, theta_max: int
) -> HighSnrStaticResult:
    """Scan the switching threshold and return the minimizer of the closed form."""
    if theta_max < 1:
        raise ValueError("theta_max must be at least 1")
    zetas = tuple(high_snr_zeta_static(ladder, lambda_prime0, t) for t in range(1, theta_max + 1))
    best = min(range(theta_max), key=zetas.__getitem__)
    return HighSnrStaticResult(theta_star=best + 1, zeta_star=zetas[best], zetas=zetas)
