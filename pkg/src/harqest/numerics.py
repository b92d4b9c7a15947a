"""Small dense-matrix utilities shared by the rest of the package.

Everything here operates on plain numpy arrays and is pure: no state, no
side effects, safe to call concurrently.
"""

import math

import numpy as np

from .errors import ModelError

__all__ = [
    "spectral_radius",
    "gaussian_q",
    "kronecker",
    "stationary_distribution",
    "null_space_vector",
]

_SQRT2 = math.sqrt(2.0)


def spectral_radius(m) -> float:
    """Largest absolute eigenvalue of a square matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def gaussian_q(x: float) -> float:
    """Upper tail probability of the standard normal, Q(x) = P[Z > x]."""
    return 0.5 * math.erfc(x / _SQRT2)


def kronecker(a, b) -> np.ndarray:
    """Kronecker product of two matrices."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def stationary_distribution(p, tol: float = 1e-9) -> np.ndarray:
    """Stationary distribution of a column-stochastic transition matrix.

    Solves the balance equations directly (one balance row replaced by the
    normalization constraint), which is exact for the small chains used here.

    Parameters
    ----------
    p : array_like
        Column-stochastic matrix: entry (j, i) is the probability of moving
        to state j given the current state i.

    Returns
    -------
    np.ndarray
        Probability vector e with p @ e = e, entries >= 0, summing to 1.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ModelError(f"transition matrix must be square, got shape {p.shape}")
    n = p.shape[0]
    col_sums = p.sum(axis=0)
    if np.max(np.abs(col_sums - 1.0)) > tol:
        raise ModelError(
            "matrix is not column-stochastic (column sums "
            f"{col_sums}); transpose a row-stochastic matrix before calling"
        )
    a = p - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        e = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"stationary distribution is not unique: {exc}") from exc
    if np.min(e) < -1e-10:
        raise ModelError(f"balance solution has negative mass: {e}")
    e = np.clip(e, 0.0, None)
    e = e / e.sum()
    residual = np.max(np.abs(p @ e - e))
    if residual > 1e-10:
        raise ModelError(f"fixed-point residual {residual:.3e} exceeds 1e-10; chain may be reducible")
    return e


def null_space_vector(m, rank_tol: float = 1e-8) -> np.ndarray:
    """Nonnegative null-space vector of a matrix with rank deficiency one.

    Returns v with ||m @ v||_inf <= 1e-8 * ||v||_inf, sign-flipped so the
    entries are nonnegative. Raises if the null space is empty, has dimension
    greater than one, or mixes signs beyond round-off.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ModelError(f"null space extraction needs a square matrix, got shape {m.shape}")
    _, svals, vt = np.linalg.svd(m)
    scale = svals[0] if svals[0] > 0 else 1.0
    if svals[-1] > rank_tol * scale:
        raise ModelError(f"matrix has full rank (smallest singular value {svals[-1]:.3e})")
    if m.shape[0] > 1 and svals[-2] <= rank_tol * scale:
        raise ModelError("rank deficiency exceeds one; null-space vector is not unique")
    v = vt[-1]
    if v.sum() < 0:
        v = -v
    if np.min(v) < -1e-8 * max(np.max(np.abs(v)), 1e-300):
        raise ModelError(f"null-space vector has mixed signs: {v}")
    return np.clip(v, 0.0, None)
