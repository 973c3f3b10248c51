"""Reduced-order PageRank and its certified error bounds.

The scheme has three steps: (1) iterate the small group recursion
``x1 <- (1-m) a11 x1 + (m/n) u`` to convergence, (2) solve one small dense
linear system per multi-member group for the within-group deviations,
(3) lift back to page coordinates. Two a-priori bound calculators relate
the node-parameter bound delta and the achievable 1-norm error, and a
third bounds the error of the pure group-average approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .aggregation import AggregatedSystem, BlockTransforms
from .baseline import (
    DEFAULT_DAMPING,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ConvergenceError,
    _check_probability_vector,
)

PIVOT_TOL = 1e-12


@dataclass
class ReducedResult:
    """Output of the reduced scheme.

    ``xi_prime`` holds per-group totals (the aggregated PageRank),
    ``x2_prime`` the within-group deviations, and ``x_prime`` the lifted
    per-page approximation.
    """

    x_prime: np.ndarray
    xi_prime: np.ndarray
    x2_prime: np.ndarray
    iterations: int
    residual: float


def aggregated_pagerank(
    a11,
    u: np.ndarray,
    n: int,
    m: float = DEFAULT_DAMPING,
    xi0: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
):
    """Iterate the group recursion to its stationary probability vector.

    Returns ``(xi, iterations, residual)``. ``a11`` must be column
    stochastic with columns scaled by group sizes summing via ``u`` to
    ``n``; any probability vector works as the start (default uniform).
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = a11.shape[0]
    if xi0 is None:
        xi = np.full(r, 1.0 / r)
    else:
        xi = _check_probability_vector(xi0, "xi0").copy()
    offset = (m / n) * np.asarray(u, dtype=np.float64)
    for k in range(1, max_iter + 1):
        xi_next = (1.0 - m) * (a11 @ xi) + offset
        diff = float(np.abs(xi_next - xi).sum())
        xi = xi_next
        if diff < tol:
            return xi, k, diff
    raise ConvergenceError(
        f"group recursion did not converge in {max_iter} iterations (last diff {diff:g})",
        last=xi,
        iterations=max_iter,
    )


def _factor_blocks(sys: AggregatedSystem, m: float):
    """LU-factor ``I - (1-m) B`` for each within-group block."""
    factors = []
    for block in sys.a22p_blocks:
        mat = np.eye(block.shape[0]) - (1.0 - m) * block
        lu, piv = lu_factor(mat)
        if np.abs(np.diag(lu)).min() < PIVOT_TOL:
            raise np.linalg.LinAlgError(
                "near-singular within-group block (pivot below threshold)"
            )
        factors.append((lu, piv))
    return factors


def _solve_deviations(sys: AggregatedSystem, m: float, xi: np.ndarray) -> np.ndarray:
    """Per-group solve of ``[I - (1-m) B] x2 = (1-m) (a21 xi)`` blocks."""
    t = sys.transforms
    if t.deviation_dim == 0:
        return np.zeros(0)
    rhs = (1.0 - m) * (sys.a21 @ xi)
    out = np.empty(t.deviation_dim)
    off = 0
    for (lu, piv), block in zip(_factor_blocks(sys, m), sys.a22p_blocks):
        k = block.shape[0]
        out[off:off + k] = lu_solve((lu, piv), rhs[off:off + k])
        off += k
    return out


def deviation_solve_operator(sys: AggregatedSystem, m: float = DEFAULT_DAMPING) -> np.ndarray:
    """Dense ``(n-r) x r`` operator ``[I - (1-m) a22p]^{-1} a21``.

    The reduced scheme applies ``(1-m)`` times this operator to the
    converged group vector; exposed for diagnostics on small systems.
    """
    t = sys.transforms
    if t.deviation_dim == 0:
        return np.zeros((0, sys.r))
    a21 = sys.a21.toarray()
    out = np.empty_like(a21)
    off = 0
    for (lu, piv), block in zip(_factor_blocks(sys, m), sys.a22p_blocks):
        k = block.shape[0]
        out[off:off + k] = lu_solve((lu, piv), a21[off:off + k])
        off += k
    return out


def run_reduced_scheme(
    sys: AggregatedSystem,
    m: float = DEFAULT_DAMPING,
    xi0: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ReducedResult:
    """Run the three-step reduced scheme to its steady state.

    Step 2 runs once, after the group iteration has converged; the block
    solves are independent per group.
    """
    xi, iterations, residual = aggregated_pagerank(
        sys.a11, sys.u, sys.n, m=m, xi0=xi0, tol=tol, max_iter=max_iter
    )
    x2 = _solve_deviations(sys, m, xi)
    x_prime = sys.transforms.apply_w1(xi) + sys.transforms.apply_w2(x2)
    return ReducedResult(
        x_prime=x_prime,
        xi_prime=xi,
        x2_prime=x2,
        iterations=iterations,
        residual=residual,
    )


def aggregated_pagerank_exact(
    sys: AggregatedSystem,
    m: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """The per-group stationary totals of the reduced recursion."""
    xi, _, _ = aggregated_pagerank(sys.a11, sys.u, sys.n, m=m, tol=tol, max_iter=max_iter)
    return xi


def error_bound_from_delta(delta: float, m: float) -> float | None:
    """A-priori 1-norm error bound of the reduced steady state.

    Returns ``4 delta (1-m) / (1 - (1-m)(1+4 delta))``, valid whenever the
    denominator is positive; ``None`` signals the bound is inapplicable at
    this (delta, m) pair.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if delta < 0.0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    denom = 1.0 - (1.0 - m) * (1.0 + 4.0 * delta)
    if denom <= 0.0:
        return None
    return 4.0 * delta * (1.0 - m) / denom


def delta_for_error_bound(epsilon: float, m: float) -> float:
    """Largest node-parameter bound guaranteeing 1-norm error <= epsilon.

    Inverse of :func:`error_bound_from_delta`:
    ``m epsilon / (4 (1-m) (1+epsilon))``.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return m * epsilon / (4.0 * (1.0 - m) * (1.0 + epsilon))


def group_mean_error_bound(
    x_star: np.ndarray,
    t: BlockTransforms,
    m: float,
    kappa: float | None = None,
):
    """Bound on the error of approximating pages by their group averages.

    ``kappa`` is the 1-norm distance between the true vector and its
    group-average projection; by default the tightest admissible value
    is computed from ``x_star``. Returns ``(kappa, kappa / m)``: the
    second entry bounds ``|x* - w1(xi')|_1`` for the aggregated totals
    ``xi'`` of the reduced recursion.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    x_star = _check_probability_vector(np.asarray(x_star, dtype=np.float64), "x_star")
    if kappa is None:
        projected = t.apply_w1(t.apply_v1(x_star))
        kappa = float(np.abs(x_star - projected).sum())
    elif kappa < 0:
        raise ValueError("kappa must be nonnegative")
    return kappa, kappa / m


@dataclass
class ErrorBoundReport:
    """Bundle of a-priori bounds and (optionally) the measured error."""

    delta_used: float
    m: float
    epsilon_bound: float | None
    delta_max: float | None
    kappa: float | None
    kappa_over_m: float | None
    measured_error_1norm: float | None


def error_bound_report(
    delta: float,
    m: float,
    *,
    target_epsilon: float | None = None,
    x_star: np.ndarray | None = None,
    transforms: BlockTransforms | None = None,
    x_prime: np.ndarray | None = None,
    kappa: float | None = None,
) -> ErrorBoundReport:
    """Assemble the bound report for one aggregation.

    The group-average bound needs the reference vector and transforms; the
    measured error needs both reference and approximation.
    """
    kappa_val = kappa_over_m = None
    if x_star is not None and transforms is not None:
        kappa_val, kappa_over_m = group_mean_error_bound(x_star, transforms, m, kappa=kappa)
    measured = None
    if x_star is not None and x_prime is not None:
        measured = float(np.abs(np.asarray(x_star) - np.asarray(x_prime)).sum())
    return ErrorBoundReport(
        delta_used=delta,
        m=m,
        epsilon_bound=error_bound_from_delta(delta, m),
        delta_max=(
            delta_for_error_bound(target_epsilon, m) if target_epsilon is not None else None
        ),
        kappa=kappa_val,
        kappa_over_m=kappa_over_m,
        measured_error_1norm=measured,
    )
