"""Finite-state Markov channel model and the retransmission-history update rule.

A static channel is the one-state special case, so every consumer has a
single code path.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .harq_model import HistoryCounter
from .numerics import stationary_distribution

__all__ = ["MarkovChannel", "static_channel", "step", "update_history"]


@dataclass(frozen=True, eq=False)
class MarkovChannel:
    """Gain set and column-stochastic transition matrix.

    pi[j, i] is the probability of moving to gain index j from gain index i;
    every column sums to one and every entry is strictly positive, so the
    chain is irreducible and aperiodic.
    """

    gains: tuple
    pi: np.ndarray

    def __post_init__(self):
        gains = tuple(float(g) for g in self.gains)
        if not gains:
            raise ModelError("channel needs at least one gain state")
        if any(g <= 0 for g in gains):
            raise ModelError("channel power gains must be positive")
        pi = np.asarray(self.pi, dtype=float)
        b = len(gains)
        if pi.shape != (b, b):
            raise ModelError(f"transition matrix shape {pi.shape} does not match {b} gains")
        if np.max(np.abs(pi.sum(axis=0) - 1.0)) > 1e-12:
            raise ModelError(
                "transition matrix must be column-stochastic "
                f"(column sums {pi.sum(axis=0)})"
            )
        if np.min(pi) <= 0.0:
            raise ModelError("all transition probabilities must be strictly positive")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "_cumulative", np.cumsum(pi, axis=0))

    @property
    def size(self) -> int:
        return len(self.gains)

    def stationary(self) -> np.ndarray:
        return stationary_distribution(self.pi)


def static_channel(gain: float) -> MarkovChannel:
    """A constant-gain channel as a one-state Markov chain."""
    return MarkovChannel(gains=(gain,), pi=np.ones((1, 1)))


def step(ch: MarkovChannel, current_index: int, rng: np.random.Generator) -> int:
    """Sample the next gain index. Always consumes exactly one draw from rng."""
    u = rng.random()
    if ch.size == 1:
        return 0
    return int(np.searchsorted(ch._cumulative[:, current_index], u, side="right"))


def update_history(omega: HistoryCounter, last_action: int, last_index: int) -> HistoryCounter:
    """Advance the per-gain attempt counter given last slot's action and gain index.

    A new transmission starts a fresh round (counter reset to the unit vector
    at last_index); a retransmission adds last slot's gain to the round.
    """
    if last_action == 0:
        return HistoryCounter.unit(omega.gains, last_index)
    return omega.incremented(last_index)
