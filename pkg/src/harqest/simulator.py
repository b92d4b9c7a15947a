"""Seeded Monte Carlo of the closed loop: channel, link outcomes, policy
execution, and the receiver's per-slot estimation cost.

The receiver's MSE is a deterministic function of the age q, so the loop
never simulates raw trajectories: it reads Tr(P_k) off the cost ladder and
all randomness comes from packet outcomes and channel motion. One uniform is
drawn per slot for the packet outcome and one for the channel step,
regardless of the action taken, so equally-seeded runs of different policies
see identical random streams (common random numbers).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import MarkovChannel, step, update_history
from .errors import DepthError
from .harq_model import HarqModel, HistoryCounter, block_error_prob, conditional_error_prob
from .lti_estimation import CostLadder
from .mdp_core import Policy
from .mdp_markov import build_high_snr_chain
from .mdp_static import high_snr_zeta_static

__all__ = [
    "PolicySpec",
    "SimConfig",
    "SimulationTrace",
    "run",
    "PolicyEntry",
    "ComparisonRow",
    "ComparisonTable",
    "evaluate_policies",
    "HighSnrValidation",
    "empirical_vs_closed_form",
]

_KINDS = (
    "table",
    "delay_optimal_table",
    "myopic",
    "no_retransmission",
    "always_retransmit_psi",
    "threshold",
)


@dataclass(frozen=True)
class PolicySpec:
    """What to execute each slot.

    table / delay_optimal_table carry a solved Policy and look actions up
    with truncation clamping; myopic recomputes the one-step rule on the fly;
    threshold retransmits at round length 1 once the age passes the current
    gain's threshold (the perfect-retransmission validation policy).
    """

    kind: str
    table: Policy = None
    thetas: tuple = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("table", "delay_optimal_table") and self.table is None:
            raise ValueError(f"{self.kind} policy needs a solved table")
        if self.kind == "threshold" and not self.thetas:
            raise ValueError("threshold policy needs one threshold per gain state")
        if not self.label:
            object.__setattr__(self, "label", self.kind)


@dataclass(frozen=True)
class SimConfig:
    """Shared simulation settings. Replicate i of base seed s uses the
    independent stream seeded by the pair (s, i)."""

    slots: int = 10_000
    replicates: int = 1
    seed: int = 0
    force_success_retransmissions: bool = False
    initial_channel: int = None  # None: draw from the stationary distribution

    def __post_init__(self):
        if self.slots < 1:
            raise ValueError("slots must be at least 1")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Per-slot record of one replicate plus the running average (partial
    means of Tr(P_k)). A diverged trace is truncated at the slot whose cost
    overflowed the ladder."""

    k: np.ndarray
    a: np.ndarray
    gamma: np.ndarray
    r: np.ndarray
    q: np.ndarray
    xi: np.ndarray
    trace_mse: np.ndarray
    running_avg: np.ndarray
    omega: np.ndarray  # per-slot attempt counter, kept for conformance checks
    seed: int
    replicate: int
    diverged: bool = False
    diverged_slot: int = None

    @property
    def final_average(self) -> float:
        return float(self.running_avg[-1]) if len(self.running_avg) else math.inf

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,a,gamma,r,q,xi,trace_mse,running_avg\n")
            for i in range(len(self.k)):
                fh.write(
                    f"{self.k[i]},{self.a[i]},{self.gamma[i]},{self.r[i]},"
                    f"{self.q[i]},{self.xi[i]},{self.trace_mse[i]!r},{self.running_avg[i]!r}\n"
                )
            if self.diverged:
                fh.write(f"# diverged at slot {self.diverged_slot}\n")


class _GrowableLadder:
    """Chunked on-demand extension of a shared immutable ladder."""

    def __init__(self, ladder: CostLadder):
        self._ladder = ladder

    def trace(self, n: int) -> float:
        if n > self._ladder.depth:
            self._ladder = self._ladder.extended(n + 32)
        return self._ladder.trace(n)


def _action_fn(spec: PolicySpec, harq: HarqModel, ch: MarkovChannel, glad: _GrowableLadder):
    if spec.kind in ("table", "delay_optimal_table"):
        table = spec.table
        index = table.index()
        actions = table.actions
        if table.kind == "static":
            r_max = table.params["r_max"]
            q_max = table.params["q_max"]

            def act(r, q, omega, xi):
                return int(actions[index[(min(r, r_max), min(q, q_max))]])

        else:
            caps = tuple(table.params["omega_caps"])
            q_max = table.params["q_max"]

            def act(r, q, omega, xi):
                clamped = tuple(min(o, c) for o, c in zip(omega.counts, caps))
                return int(actions[index[(clamped, min(q, q_max), xi)]])

        return act
    if spec.kind == "myopic":
        new_tx = tuple(block_error_prob(harq, (g,)) for g in ch.gains)

        def act(r, q, omega, xi):
            g0 = new_tx[xi]
            g1 = conditional_error_prob(harq, omega, ch.gains[xi])
            fresh = g0 * glad.trace(q + 1) + (1.0 - g0) * glad.trace(1)
            retx = g1 * glad.trace(q + 1) + (1.0 - g1) * glad.trace(omega.total + 1)
            return 0 if retx >= fresh else 1

        return act
    if spec.kind == "no_retransmission":
        return lambda r, q, omega, xi: 0
    if spec.kind == "always_retransmit_psi":
        return lambda r, q, omega, xi: 0 if r == q else 1
    thetas = tuple(int(t) for t in spec.thetas)

    def act(r, q, omega, xi):
        return 1 if (r == 1 and q > thetas[xi]) else 0

    return act


def run(
    harq: HarqModel,
    ch: MarkovChannel,
    ladder: CostLadder,
    policy: PolicySpec,
    cfg: SimConfig,
    replicate: int = 0,
) -> SimulationTrace:
    """Simulate one replicate. Deterministic given (cfg.seed, replicate)."""
    rng = np.random.default_rng([cfg.seed, replicate])
    glad = _GrowableLadder(ladder)
    act = _action_fn(policy, harq, ch, glad)
    new_tx = tuple(block_error_prob(harq, (g,)) for g in ch.gains)

    if cfg.initial_channel is None:
        stationary = ch.stationary()
        xi_prev = int(np.searchsorted(np.cumsum(stationary), rng.random(), side="right"))
        xi_prev = min(xi_prev, ch.size - 1)
    else:
        xi_prev = int(cfg.initial_channel)
        if not 0 <= xi_prev < ch.size:
            raise ValueError(f"initial_channel {xi_prev} out of range")
    omega = HistoryCounter.unit(ch.gains, xi_prev)
    xi = step(ch, xi_prev, rng)
    r, q = 1, 1

    slots = cfg.slots
    col_k = np.arange(1, slots + 1, dtype=np.int64)
    col_a = np.zeros(slots, dtype=np.int8)
    col_gamma = np.zeros(slots, dtype=np.int8)
    col_r = np.zeros(slots, dtype=np.int64)
    col_q = np.zeros(slots, dtype=np.int64)
    col_xi = np.zeros(slots, dtype=np.int64)
    col_cost = np.zeros(slots, dtype=np.float64)
    col_omega = np.zeros((slots, ch.size), dtype=np.int64)
    diverged = False
    diverged_slot = None
    recorded = slots
    for i in range(slots):
        try:
            cost = glad.trace(q)
            a = act(r, q, omega, xi)
        except DepthError:
            # The cost (or a lookahead the policy needs) left the
            # representable range: the estimate diverged.
            diverged = True
            diverged_slot = i + 1
            recorded = i
            break
        if a == 0:
            p_err = new_tx[xi]
        elif cfg.force_success_retransmissions:
            p_err = 0.0
        else:
            p_err = conditional_error_prob(harq, omega, ch.gains[xi])
        gamma = 1 if rng.random() >= p_err else 0
        col_a[i] = a
        col_gamma[i] = gamma
        col_r[i] = r
        col_q[i] = q
        col_xi[i] = xi
        col_cost[i] = cost
        col_omega[i] = omega.counts
        r_next = 1 if a == 0 else r + 1
        q_next = r_next if gamma == 1 else q + 1
        omega = update_history(omega, a, xi)
        xi = step(ch, xi, rng)
        r, q = r_next, q_next
    sl = slice(0, recorded)
    cost_rec = col_cost[sl]
    running = np.cumsum(cost_rec) / np.arange(1, recorded + 1) if recorded else np.array([])
    return SimulationTrace(
        k=col_k[sl],
        a=col_a[sl],
        gamma=col_gamma[sl],
        r=col_r[sl],
        q=col_q[sl],
        xi=col_xi[sl],
        trace_mse=cost_rec,
        running_avg=running,
        omega=col_omega[sl],
        seed=cfg.seed,
        replicate=replicate,
        diverged=diverged,
        diverged_slot=diverged_slot,
    )


def replay_raw_trajectories(sys, kal, trace: SimulationTrace, seed: int = 0) -> dict:
    """Demonstration-only replay of the raw process behind a recorded trace.

    Draws process, measurement, and initial-state noise, runs the sensor's
    steady-state filter, and forms the receiver's estimate by propagating the
    freshest delivered sensor estimate forward by the recorded age. The
    per-slot squared estimation errors fluctuate around the trace's
    deterministic Tr(P_k) values; nothing here feeds back into the loop.

    Only short horizons are meaningful when the process is unstable: the raw
    state grows like rho(A)^k while the estimation error stays bounded, so
    float64 cancellation swamps the error once rho(A)^k nears 1e13 (about 35
    slots at rho = 2.4). This is one reason the main loop reads costs off the
    ladder instead of simulating trajectories.
    """
    rng = np.random.default_rng([seed, trace.seed, trace.replicate])
    n = sys.n
    m = sys.C.shape[0]
    slots = len(trace.k)
    chol_w = np.linalg.cholesky(sys.Q_w + 1e-15 * np.eye(n))
    chol_v = np.linalg.cholesky(sys.Q_v + 1e-15 * np.eye(m))
    chol_0 = np.linalg.cholesky(sys.Sigma0 + 1e-15 * np.eye(n))
    x = np.zeros((slots + 1, n))
    y = np.zeros((slots + 1, m))
    sensor = np.zeros((slots + 1, n))
    receiver = np.zeros((slots, n))
    squared_error = np.zeros(slots)
    x[0] = chol_0 @ rng.standard_normal(n)
    a_pow = {0: np.eye(n)}

    def power(p):
        if p not in a_pow:
            a_pow[p] = sys.A @ power(p - 1)
        return a_pow[p]

    for k in range(slots + 1):
        if k > 0:
            x[k] = sys.A @ x[k - 1] + chol_w @ rng.standard_normal(n)
        y[k] = sys.C @ x[k] + chol_v @ rng.standard_normal(m)
        prior = sys.A @ sensor[k - 1] if k > 0 else np.zeros(n)
        sensor[k] = prior + kal.K_bar @ (y[k] - sys.C @ prior)
    for i in range(slots):
        k = int(trace.k[i])
        q = int(trace.q[i])
        origin = max(k - q, 0)
        receiver[i] = power(q) @ sensor[origin]
        squared_error[i] = float(np.sum((x[k] - receiver[i]) ** 2))
    return {
        "x": x[1:],
        "y": y[1:],
        "sensor_estimate": sensor[1:],
        "receiver_estimate": receiver,
        "squared_error": squared_error,
    }


@dataclass(frozen=True)
class PolicyEntry:
    """One column of a comparison. harq overrides the shared link model,
    which is how same-channel CC-vs-IR comparisons are expressed."""

    label: str
    spec: PolicySpec
    harq: HarqModel = None


@dataclass(frozen=True, eq=False)
class ComparisonRow:
    label: str
    finals: tuple
    mean: float
    stderr: float
    n_diverged: int


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    rows: tuple
    trajectories: dict  # label -> per-slot mean running average (non-diverged only)

    def row(self, label: str) -> ComparisonRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("policy,mean_final_avg_mse,stderr,replicates,diverged\n")
            for row in self.rows:
                fh.write(
                    f"{row.label},{row.mean!r},{row.stderr!r},{len(row.finals)},{row.n_diverged}\n"
                )


def evaluate_policies(
    entries, harq: HarqModel, ch: MarkovChannel, ladder: CostLadder, cfg: SimConfig
) -> ComparisonTable:
    """Run every entry over the same replicate seeds and summarize.

    Common random numbers: replicate i of every entry uses the stream seeded
    by (cfg.seed, i), so policies that act identically produce identical
    traces. A diverged replicate makes the row's mean infinite.
    """
    labels = [entry.label for entry in entries]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate comparison labels: {labels}")
    rows = []
    trajectories = {}
    for entry in entries:
        model = entry.harq if entry.harq is not None else harq
        finals = []
        traces = []
        n_diverged = 0
        for rep in range(cfg.replicates):
            trace = run(model, ch, ladder, entry.spec, cfg, replicate=rep)
            if trace.diverged:
                n_diverged += 1
            else:
                finals.append(trace.final_average)
                traces.append(trace.running_avg)
        if n_diverged:
            mean, stderr = math.inf, math.nan
        else:
            mean = float(np.mean(finals))
            stderr = (
                float(np.std(finals, ddof=1) / math.sqrt(len(finals)))
                if len(finals) > 1
                else 0.0
            )
            trajectories[entry.label] = np.mean(np.stack(traces), axis=0)
        rows.append(
            ComparisonRow(
                label=entry.label,
                finals=tuple(finals),
                mean=mean,
                stderr=stderr,
                n_diverged=n_diverged,
            )
        )
    return ComparisonTable(rows=tuple(rows), trajectories=trajectories)


@dataclass(frozen=True)
class HighSnrValidation:
    empirical_mean: float
    stderr: float
    zeta: float
    abs_diff: float
    within_3_sigma: bool


def empirical_vs_closed_form(
    harq: HarqModel, ch: MarkovChannel, ladder: CostLadder, thetas, cfg: SimConfig
) -> HighSnrValidation:
    """Forced-success threshold simulation against the reduced-chain average.

    Retransmissions are forced to succeed; fresh transmissions fail with the
    link model's single-attempt probability, which is exactly the regime the
    closed forms describe.
    """
    thetas = tuple(int(t) for t in thetas)
    cfg = replace(cfg, force_success_retransmissions=True)
    lambda_primes = tuple(block_error_prob(harq, (g,)) for g in ch.gains)
    if ch.size == 1:
        zeta = high_snr_zeta_static(ladder, lambda_primes[0], thetas[0])
    else:
        zeta = build_high_snr_chain(ch, lambda_primes, thetas, ladder).zeta
    spec = PolicySpec(kind="threshold", thetas=thetas, label=f"threshold{thetas}")
    finals = [
        run(harq, ch, ladder, spec, cfg, replicate=rep).final_average
        for rep in range(cfg.replicates)
    ]
    mean = float(np.mean(finals))
    stderr = float(np.std(finals, ddof=1) / math.sqrt(len(finals))) if len(finals) > 1 else 0.0
    diff = abs(mean - zeta)
    # The relative floor keeps the verdict meaningful when the replicate
    # variance collapses to zero (e.g. error-free links).
    return HighSnrValidation(
        empirical_mean=mean,
        stderr=stderr,
        zeta=zeta,
        abs_diff=diff,
        within_3_sigma=diff <= 3.0 * stderr + 1e-9 * (1.0 + abs(zeta)),
    )
