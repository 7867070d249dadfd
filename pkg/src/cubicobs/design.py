"""Structural observer design: unknown-input decoupling and dynamics gains.

The observer state ``w`` must track ``T x`` with ``T = I - E C`` chosen so
that the unknown-input channel drops out, ``T D = 0``.  That is feasible
exactly when ``rank(C D) = rank(D)``, and the canonical choice is
``E = D (C D)^+``.  Given any output injection ``L``, the gains

    G = T A - L C
    J = T A E + L (I - C E)

satisfy the consistency identity ``T A - J C - G T = 0``, which is what
makes the estimation error autonomous up to nonlinearity mismatch.  ``L``
itself only has to render ``G`` Hurwitz; :func:`stabilize_L` searches for
one by derivative-free multistart minimization of the spectral abscissa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .numlin import as_matrix, mat_rank, pinv

__all__ = [
    "DecouplingInfeasibleError",
    "GainSearchError",
    "GainSearchOptions",
    "StructuralDesign",
    "decoupling_feasible",
    "compute_E",
    "design_GJ",
    "verify_structure",
    "spectral_abscissa",
    "stabilize_L",
]

_DECOUPLE_TOL = 1e-9


class DecouplingInfeasibleError(ValueError):
    """rank(CD) != rank(D): no E can remove the unknown-input channel."""


class GainSearchError(RuntimeError):
    """The stabilizing-gain search exhausted its budget."""


@dataclass(frozen=True)
class GainSearchOptions:
    seed: int = 0
    restarts: int = 16
    max_iters: int = 400


@dataclass(eq=False)
class StructuralDesign:
    """Result of a gain construction, with its residuals recomputed."""

    E: np.ndarray
    T: np.ndarray
    G: np.ndarray
    J: np.ndarray
    L: np.ndarray | None
    residual_sylvester: float
    residual_decoupling: float | None


def decoupling_feasible(C, D, rtol: float = 1e-10) -> bool:
    """True iff ``rank(C D) == rank(D)``."""
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    if C.shape[1] != D.shape[0]:
        raise ValueError(f"C has {C.shape[1]} columns but D has {D.shape[0]} rows")
    return mat_rank(C @ D, rtol) == mat_rank(D, rtol)


def compute_E(C, D) -> np.ndarray:
    """Canonical decoupling gain ``E = D (C D)^+``.

    Raises :class:`DecouplingInfeasibleError` when the rank condition fails
    (or when, despite a borderline rank test, ``(I - E C) D`` does not
    vanish numerically).
    """
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    if not decoupling_feasible(C, D):
        raise DecouplingInfeasibleError("rank(CD) != rank(D)")
    E = D @ pinv(C @ D)
    residual = float(np.max(np.abs((np.eye(C.shape[1]) - E @ C) @ D), initial=0.0))
    if residual > _DECOUPLE_TOL:
        raise DecouplingInfeasibleError(
            f"rank(CD) != rank(D) within working precision (residual {residual:.2e})"
        )
    return E


def design_GJ(A, C, E, L, D=None) -> StructuralDesign:
    """Assemble ``G`` and ``J`` from an output injection ``L``.

    ``D`` is optional; when given, the decoupling residual is reported as
    well.  The returned residuals come from :func:`verify_structure`, not
    from the construction itself.
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    E = as_matrix(E, "E")
    L = as_matrix(L, "L")
    n = A.shape[0]
    T = np.eye(n) - E @ C
    G = T @ A - L @ C
    J = T @ A @ E + L @ (np.eye(C.shape[0]) - C @ E)
    res_syl = float(np.max(np.abs(T @ A - J @ C - G @ T)))
    res_dec = None
    if D is not None:
        D = as_matrix(D, "D")
        res_dec = float(np.max(np.abs(T @ D), initial=0.0))
    return StructuralDesign(E=E, T=T, G=G, J=J, L=L,
                            residual_sylvester=res_syl, residual_decoupling=res_dec)


def verify_structure(A, C, D, E, G, J) -> tuple[float, float]:
    """Max-abs residuals of the two structural identities.

    Returns ``(|T A - J C - G T|_max, |T D|_max)`` with ``T = I - E C``.
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    E = as_matrix(E, "E")
    G = as_matrix(G, "G")
    J = as_matrix(J, "J")
    T = np.eye(A.shape[0]) - E @ C
    res_syl = float(np.max(np.abs(T @ A - J @ C - G @ T)))
    res_dec = float(np.max(np.abs(T @ D), initial=0.0))
    return res_syl, res_dec


def spectral_abscissa(M) -> float:
    """Largest real part of the eigenvalues of ``M``."""
    return float(np.max(np.linalg.eigvals(as_matrix(M, "M")).real))


def stabilize_L(T, A, C, margin: float, opts: GainSearchOptions | None = None) -> np.ndarray:
    """Find ``L`` with ``spectral_abscissa(T A - L C) <= -margin``.

    Derivative-free multistart search (Nelder-Mead on the spectral
    abscissa); deterministic for a fixed ``opts.seed``.  ``L = 0`` is
    accepted immediately when ``T A`` already meets the margin.  Raises
    :class:`GainSearchError` when the budget is exhausted, which includes
    the hopeless case of a fixed unstable mode (for example ``C = 0``).
    """
    if opts is None:
        opts = GainSearchOptions()
    if margin <= 0:
        raise ValueError("margin must be positive")
    T = as_matrix(T, "T")
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    TA = T @ A
    n = A.shape[0]
    n_y = C.shape[0]

    def abscissa_of(flat: np.ndarray) -> float:
        return spectral_abscissa(TA - flat.reshape(n, n_y) @ C)

    best_val = spectral_abscissa(TA)
    best_L = np.zeros((n, n_y))
    if best_val <= -margin:
        return best_L

    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        scale = 10.0 ** rng.uniform(-1.0, 2.0)
        start = scale * rng.standard_normal(n * n_y)
        res = minimize(
            abscissa_of,
            start,
            method="Nelder-Mead",
            options={"maxiter": opts.max_iters, "xatol": 1e-9, "fatol": 1e-12},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
            best_L = res.x.reshape(n, n_y)
        if best_val <= -margin:
            return best_L
    raise GainSearchError(
        f"no L reached spectral abscissa <= {-margin:g}; best found {best_val:.6g}"
    )
