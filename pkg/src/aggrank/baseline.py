"""Full-order PageRank by the power method.

This is the reference computation every reduced-order approximation in the
package is measured against. The iteration uses the sparse form
``x <- (1-m) A x + (m/n) 1`` and never forms the dense teleportation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

DEFAULT_DAMPING = 0.15
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6


class ConvergenceError(RuntimeError):
    """Iteration hit max_iter; carries the last iterate for diagnosis."""

    def __init__(self, message: str, last: np.ndarray, iterations: int):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


@dataclass
class PageRankResult:
    """PageRank values plus the iteration count and final 1-norm update."""

    values: np.ndarray
    iterations: int
    residual: float


def _check_probability_vector(x: np.ndarray, name: str, tol: float = 1e-9) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(x < -tol) or abs(x.sum() - 1.0) > tol:
        raise ValueError(f"{name} must be a probability vector")
    return x


def _check_column_stochastic(A, tol: float = 1e-9) -> None:
    colsums = np.asarray(A.sum(axis=0)).ravel()
    bad = np.flatnonzero(np.abs(colsums - 1.0) > tol)
    if bad.size:
        raise ValueError(
            f"matrix is not column stochastic (first bad column {bad[0]}, "
            f"sum {colsums[bad[0]]!r})"
        )
    if A.nnz and A.data.min() < -tol:
        raise ValueError("matrix is not column stochastic (negative entry)")


def power_method(
    A: sparse.csc_array,
    m: float = DEFAULT_DAMPING,
    x0: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PageRankResult:
    """Iterate ``x <- (1-m) A x + (m/n) 1`` until the 1-norm successive
    difference drops below ``tol``.

    ``A`` must be column stochastic and ``x0`` (default uniform) a
    probability vector. Raises :class:`ConvergenceError` after ``max_iter``
    steps without convergence.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    _check_column_stochastic(A)
    n = A.shape[0]
    if x0 is None:
        x = np.full(n, 1.0 / n)
    else:
        x = _check_probability_vector(x0, "x0").copy()

    teleport = m / n
    for k in range(1, max_iter + 1):
        x_next = (1.0 - m) * (A @ x) + teleport
        diff = float(np.abs(x_next - x).sum())
        x = x_next
        if diff < tol:
            return PageRankResult(values=x, iterations=k, residual=diff)
    raise ConvergenceError(
        f"power method did not converge in {max_iter} iterations (last diff {diff:g})",
        last=x,
        iterations=max_iter,
    )
