"""Average-cost MDP for the finite-state Markov channel, plus the
perfect-retransmission reduced chain and its closed-form average cost.

States are (omega, q, xi): omega counts the pending round's attempts per gain
state, q is the age of the freshest delivered estimate, and xi is the current
gain index. The one-state channel reduces exactly to the static grid.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channel import MarkovChannel
from .errors import ConfigError, ModelError
from .harq_model import HarqModel, HistoryCounter, conditional_error_prob
from .lti_estimation import CostLadder
from .mdp_core import FiniteAverageCostMdp, Policy, relative_value_iteration
from .mdp_static import StabilityReport, SwitchingReport
from .numerics import null_space_vector, spectral_radius

__all__ = [
    "check_stability_markov",
    "MarkovMdp",
    "build_markov_mdp",
    "solve_rvi_markov",
    "verify_switching_markov",
    "HighSnrChain",
    "build_high_snr_chain",
    "high_snr_markov",
    "HighSnrMarkovResult",
]


def check_stability_markov(pi, lambdas, rho_sq_a: float) -> StabilityReport:
    """rho(Pi @ diag(worst retransmission errors)) times rho^2(A), verdict < 1.

    Sufficient only, exactly as in the static case.
    """
    pi = np.asarray(pi, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    product_value = spectral_radius(pi @ np.diag(lambdas)) * float(rho_sq_a)
    return StabilityReport(product=product_value, stable=product_value < 1.0)


@dataclass(frozen=True, eq=False)
class MarkovMdp:
    """Truncated (omega, q, xi) grid with kernel, costs, and error tables."""

    core: FiniteAverageCostMdp
    states: tuple
    index: dict
    channel: MarkovChannel
    omega_caps: tuple
    q_max: int
    cost_mode: str
    ladder: CostLadder
    new_tx_error: tuple  # g~(0, xi) per gain index


def build_markov_mdp(
    harq: HarqModel,
    ch: MarkovChannel,
    ladder: CostLadder,
    omega_caps,
    q_max: int,
    cost_mode: str = "mse",
) -> MarkovMdp:
    """Enumerate the truncated state space and assemble the kernel.

    Truncation: omega is capped per gain state, q is clamped at q_max on
    failure, and a retransmission is unavailable when it would push the
    current gain's count past its cap.
    """
    b = ch.size
    caps = tuple(int(c) for c in omega_caps)
    if len(caps) != b:
        raise ConfigError(f"omega_caps has {len(caps)} entries, channel has {b} states")
    if any(c < 1 for c in caps):
        raise ConfigError("every omega cap must be at least 1")
    if q_max < sum(caps) + 1:
        raise ConfigError(f"q_max must be at least sum(omega_caps) + 1 = {sum(caps) + 1}")
    if cost_mode not in ("mse", "delay"):
        raise ConfigError(f"cost_mode must be 'mse' or 'delay', got {cost_mode!r}")
    ladder = ladder.extended(q_max)

    states = []
    for omega in product(*[range(c + 1) for c in caps]):
        attempts = sum(omega)
        if attempts < 1:
            continue
        for q in range(attempts, q_max + 1):
            for xi in range(b):
                states.append((omega, q, xi))
    states = tuple(states)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)

    new_tx_error = tuple(
        conditional_error_prob(harq, HistoryCounter.zero(ch.gains), ch.gains[xi])
        for xi in range(b)
    )

    width = 2 * b  # (success, failure) per next gain index
    idx0 = np.zeros((n, width), dtype=np.int64)
    prob0 = np.zeros((n, width))
    idx1 = np.zeros((n, width), dtype=np.int64)
    prob1 = np.zeros((n, width))
    available = np.zeros((n, 2), dtype=bool)
    available[:, 0] = True
    for s, (omega, q, xi) in enumerate(states):
        unit = tuple(1 if j == xi else 0 for j in range(b))
        q_fail = min(q + 1, q_max)
        g0 = new_tx_error[xi]
        col = 0
        for xi_next in range(b):
            p_ch = ch.pi[xi_next, xi]
            idx0[s, col] = index[(unit, 1, xi_next)]
            prob0[s, col] = p_ch * (1.0 - g0)
            idx0[s, col + 1] = index[(unit, q_fail, xi_next)]
            prob0[s, col + 1] = p_ch * g0
            col += 2
        if omega[xi] + 1 <= caps[xi]:
            available[s, 1] = True
            history = HistoryCounter(counts=omega, gains=ch.gains)
            g_retx = conditional_error_prob(harq, history, ch.gains[xi])
            omega_next = tuple(o + u for o, u in zip(omega, unit))
            q_success = sum(omega) + 1
            col = 0
            for xi_next in range(b):
                p_ch = ch.pi[xi_next, xi]
                idx1[s, col] = index[(omega_next, q_success, xi_next)]
                prob1[s, col] = p_ch * (1.0 - g_retx)
                idx1[s, col + 1] = index[(omega_next, q_fail, xi_next)]
                prob1[s, col + 1] = p_ch * g_retx
                col += 2
    if cost_mode == "mse":
        stage = np.array([ladder.trace(q) for (_, q, _) in states])
    else:
        stage = np.array([float(q) for (_, q, _) in states])
    costs = np.stack([stage, stage], axis=1)
    ref_omega = tuple(1 if j == 0 else 0 for j in range(b))
    core = FiniteAverageCostMdp(
        costs=costs,
        transitions=[(idx0, prob0), (idx1, prob1)],
        available=available,
        ref=index[(ref_omega, 1, 0)],
    )
    return MarkovMdp(
        core=core,
        states=states,
        index=index,
        channel=ch,
        omega_caps=caps,
        q_max=q_max,
        cost_mode=cost_mode,
        ladder=ladder,
        new_tx_error=new_tx_error,
    )


def solve_rvi_markov(mdp: MarkovMdp, tol: float = 1e-9, max_iters: int = 100_000) -> Policy:
    """Relative value iteration with reference state (unit omega at gain 0, q=1, xi=0)."""
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
        kind="markov",
        params={
            "omega_caps": mdp.omega_caps,
            "q_max": mdp.q_max,
            "gains": mdp.channel.gains,
        },
    )


def verify_switching_markov(policy: Policy) -> SwitchingReport:
    """Threshold structure on the (omega, q, xi) grid.

    (i) action 0 at (omega, q, xi) forces action 0 at (omega + z * unit_i, q, xi);
    (ii) action 1 at (omega, q, xi) forces action 1 at (omega, q + z, xi).
    Immediate neighbors suffice: in-grid segments along each direction are
    contiguous.
    """
    index = policy.index()
    violations = []
    for s, (omega, q, xi) in enumerate(policy.states):
        a = policy.actions[s]
        if a == 0:
            for i in range(len(omega)):
                bumped = tuple(o + (1 if j == i else 0) for j, o in enumerate(omega))
                neighbor = index.get((bumped, q, xi))
                if neighbor is not None and policy.actions[neighbor] != 0:
                    violations.append(((omega, q, xi), (bumped, q, xi)))
        else:
            neighbor = index.get((omega, q + 1, xi))
            if neighbor is not None and policy.actions[neighbor] != 1:
                violations.append(((omega, q, xi), (omega, q + 1, xi)))
    return SwitchingReport(passed=not violations, violations=tuple(violations))


@dataclass(frozen=True, eq=False)
class HighSnrChain:
    """Reduced chain of the perfect-retransmission regime for one threshold vector.

    Block layout per gain index: position 0 is the post-retransmission state
    (age 2, fresh round just delivered), position p >= 1 is (round length 1,
    age p). The block covers ages up to max(theta_max, 2) + 1 so the failure
    step out of the post-retransmission state always lands inside the block.
    """

    thetas: tuple
    block_size: int
    transition: np.ndarray  # column-stochastic, B * block_size square
    costs: np.ndarray
    stationary: np.ndarray
    zeta: float


def build_high_snr_chain(
    ch: MarkovChannel, lambda_primes, thetas, ladder: CostLadder
) -> HighSnrChain:
    """Assemble the reduced chain, its stationary vector, and its average cost.

    lambda_primes[i] is the fresh-transmission error probability in gain
    state i; retransmissions always succeed. thetas[i] is the age threshold
    beyond which a round-length-1 state retransmits under gain i.
    """
    b = ch.size
    thetas = tuple(int(t) for t in thetas)
    lambda_primes = tuple(float(v) for v in lambda_primes)
    if len(thetas) != b or len(lambda_primes) != b:
        raise ModelError("thetas and lambda_primes must have one entry per gain state")
    if any(t < 1 for t in thetas):
        raise ModelError("every threshold must be at least 1")
    if any(not 0.0 <= v < 1.0 for v in lambda_primes):
        raise ModelError("lambda_primes must lie in [0, 1)")
    top = max(max(thetas), 2)
    block = top + 2
    ladder = ladder.extended(top + 1)
    m = np.zeros((b * block, b * block))
    for i in range(b):
        within = np.zeros((block, block))
        lam = lambda_primes[i]
        for pos in range(block):
            age = 2 if pos == 0 else pos
            fresh = pos == 0 or age <= thetas[i]
            if fresh:
                within[1, pos] += 1.0 - lam       # success: age resets to 1
                within[age + 1, pos] += lam       # failure: age advances
            else:
                within[0, pos] += 1.0             # retransmission always succeeds
        for xi_next in range(b):
            rows = slice(xi_next * block, (xi_next + 1) * block)
            cols = slice(i * block, (i + 1) * block)
            m[rows, cols] = ch.pi[xi_next, i] * within
    block_costs = [ladder.trace(2)] + [ladder.trace(q) for q in range(1, top + 2)]
    costs = np.array(block_costs * b)
    e = null_space_vector(m - np.eye(b * block))
    stationary = e / e.sum()
    zeta = float(costs @ stationary)
    return HighSnrChain(
        thetas=thetas,
        block_size=block,
        transition=m,
        costs=costs,
        stationary=stationary,
        zeta=zeta,
    )


@dataclass(frozen=True)
class HighSnrMarkovResult:
    theta_star: tuple
    zeta_star: float
    evaluated: dict
    skipped: tuple


def high_snr_markov(
    ladder: CostLadder, ch: MarkovChannel, lambda_primes, theta_max_search: int = 8
) -> HighSnrMarkovResult:
    """Exhaustive threshold-vector search over {1..theta_max_search}^B."""
    if theta_max_search < 1:
        raise ValueError("theta_max_search must be at least 1")
    evaluated = {}
    skipped = []
    best_theta, best_zeta = None, np.inf
    for thetas in product(range(1, theta_max_search + 1), repeat=ch.size):
        try:
            chain = build_high_snr_chain(ch, lambda_primes, thetas, ladder)
        except ModelError:
            skipped.append(thetas)
            continue
        evaluated[thetas] = chain.zeta
        if chain.zeta < best_zeta:
            best_theta, best_zeta = thetas, chain.zeta
    if best_theta is None:
        raise ModelError("every threshold vector produced a degenerate chain")
    return HighSnrMarkovResult(
        theta_star=best_theta, zeta_star=best_zeta, evaluated=evaluated, skipped=tuple(skipped)
    )
