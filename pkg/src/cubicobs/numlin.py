"""Small dense-matrix primitives shared by the rest of the toolkit.

Everything operates on plain 2-D numpy float arrays.  Symmetry-sensitive
routines symmetrize their argument first, since every matrix inequality
handled downstream only concerns the symmetric part.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_matrix",
    "mat_rank",
    "pinv",
    "sym_eig_extremes",
    "definiteness_margin",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a 2-D float array, rejecting non-finite entries."""
    M = np.atleast_2d(np.asarray(a, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got {M.ndim}-D")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def mat_rank(M, rtol: float = 1e-10) -> int:
    """Numerical rank: number of singular values above ``rtol`` times the largest.

    The relative threshold makes the count scale invariant, so
    ``mat_rank(c * M) == mat_rank(M)`` for any nonzero ``c``.
    """
    if rtol <= 0:
        raise ValueError("rtol must be positive")
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def pinv(M) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD."""
    return np.linalg.pinv(as_matrix(M, "pinv argument"))


def sym_eig_extremes(S) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of the symmetrized input ``(S + S^T)/2``."""
    S = as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    vals = np.linalg.eigvalsh(0.5 * (S + S.T))
    return float(vals[0]), float(vals[-1])


def definiteness_margin(S) -> float:
    """Largest eigenvalue of the symmetrized input.

    A negative value certifies that the symmetric part of ``S`` is negative
    definite with that margin; zero means at most negative semidefinite.
    """
    return sym_eig_extremes(S)[1]
