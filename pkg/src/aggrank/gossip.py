"""Randomized gossip computation of the aggregated PageRank.

Each group independently picks, once per step, one of its neighbor
subsets (or silence) and scatters its weighted value to that subset; the
silent diagonal is adjusted so every realized link matrix stays column
stochastic. Run with the reduced damping ``m_hat`` and averaged over
time, the state recovers the aggregated PageRank in mean square.

Randomness contract: one PCG64 stream per group, keyed by
``SeedSequence((seed, group_id))``, with all step choices for a group
drawn up front. Traces are therefore reproducible regardless of
evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .aggregation import AggregatedSystem
from .baseline import DEFAULT_MAX_ITER, DEFAULT_TOL, _check_probability_vector
from .reduced import aggregated_pagerank

PROB_ATOL = 1e-12


class InternalConsistencyError(RuntimeError):
    """Two supposedly equal internal computations disagreed."""


def modified_damping(m: float, alpha: float) -> float:
    """Damping ``m alpha / (1 - (1-alpha) m)`` used by the gossip updates.

    Lies in ``(0, m]`` and equals ``m`` exactly when ``alpha`` is 1; with
    this choice the mean gossip dynamics keep the aggregated PageRank as
    their fixed point.
    """
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    m_hat = m * alpha / (1.0 - (1.0 - alpha) * m)
    assert 0.0 < m_hat <= m
    return m_hat


def rate_bound(m: float, alpha: float) -> float:
    """Bound ``(1-m) / (1 - (1-alpha) m)`` on the second eigenvalue modulus
    of the mean gossip matrix; the mean dynamics contract at least this
    fast per step, asymptotically."""
    if not 0.0 < m < 1.0:
        raise ValueError(f"damping m must lie in (0, 1), got {m}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return (1.0 - m) / (1.0 - (1.0 - alpha) * m)


def out_neighbors(phi: np.ndarray, i: int) -> list[int]:
    """Groups that group ``i`` links to: off-diagonal support of column ``i``."""
    return [j for j in range(phi.shape[0]) if j != i and phi[j, i] > 0.0]


def singleton_subsets(phi: np.ndarray) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """One subset per out-neighbor: every transmission targets one group."""
    return tuple(
        tuple((j,) for j in out_neighbors(phi, i)) for i in range(phi.shape[0])
    )


def full_subsets(phi: np.ndarray) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """A single subset holding all out-neighbors (empty for silent groups)."""
    subsets = []
    for i in range(phi.shape[0]):
        nbrs = out_neighbors(phi, i)
        subsets.append((tuple(nbrs),) if nbrs else ())
    return tuple(subsets)


def default_update_probabilities(
    phi: np.ndarray,
    subsets,
    alpha: float,
) -> tuple[np.ndarray, ...]:
    """Silence with probability ``1 - alpha``; each subset with probability
    ``alpha`` times its share of the column's off-diagonal weight.

    A group without out-neighbors gets the degenerate distribution
    ``[1.0]`` (it never transmits). A nonempty subset whose total weight
    is zero is rejected.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    probs = []
    for i, subs in enumerate(subsets):
        if not subs:
            probs.append(np.array([1.0]))
            continue
        weights = np.array([sum(phi[j, i] for j in s) for s in subs])
        total = weights.sum()
        if total <= 0.0:
            raise ValueError(f"group {i} has neighbor subsets with zero total weight")
        if np.any(weights <= 0.0):
            bad = int(np.flatnonzero(weights <= 0.0)[0])
            raise ValueError(f"group {i} subset {bad} has zero weight")
        probs.append(np.concatenate([[1.0 - alpha], alpha * weights / total]))
    return tuple(probs)


@dataclass(frozen=True)
class GossipConfig:
    """Everything a gossip run needs: link matrix, communication pattern,
    update probabilities, and damping.

    ``subsets[i]`` partitions the out-neighbors of group ``i``;
    ``probs[i]`` has one entry per choice ``0..g_i`` (0 = silence) and
    sums to 1. Structural validity is enforced here; the probability
    interval condition is checked by
    :func:`validate_update_probabilities`.
    """

    phi: np.ndarray
    u: np.ndarray
    n: int
    m: float
    alpha: float
    subsets: tuple[tuple[tuple[int, ...], ...], ...]
    probs: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.float64))
        r = phi.shape[0]
        if phi.shape != (r, r):
            raise ValueError("phi must be square")
        if self.u.shape != (r,):
            raise ValueError("u must have one entry per group")
        if abs(self.u.sum() - self.n) > 1e-9:
            raise ValueError("group sizes must sum to the page count")
        if not 0.0 < self.m < 1.0:
            raise ValueError(f"damping m must lie in (0, 1), got {self.m}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if len(self.subsets) != r:
            raise ValueError("need one subset partition per group")
        if not self.probs:
            object.__setattr__(
                self,
                "probs",
                default_update_probabilities(phi, self.subsets, self.alpha),
            )
        if len(self.probs) != r:
            raise ValueError("need one probability vector per group")
        for i in range(r):
            support = set(out_neighbors(phi, i))
            listed: list[int] = []
            for s in self.subsets[i]:
                listed.extend(s)
            if len(listed) != len(set(listed)):
                raise ValueError(f"group {i} neighbor subsets overlap")
            if set(listed) != support:
                raise ValueError(
                    f"group {i} neighbor subsets must partition its out-neighbors"
                )
            p = np.asarray(self.probs[i], dtype=np.float64)
            if p.shape != (len(self.subsets[i]) + 1,):
                raise ValueError(f"group {i} needs {len(self.subsets[i]) + 1} probabilities")
            if np.any(p < -PROB_ATOL) or abs(p.sum() - 1.0) > PROB_ATOL:
                raise ValueError(f"group {i} probabilities must be nonnegative and sum to 1")

    @property
    def r(self) -> int:
        return self.phi.shape[0]

    @property
    def m_hat(self) -> float:
        return modified_damping(self.m, self.alpha)

    def choice_counts(self) -> tuple[int, ...]:
        """Number of choices (including silence) per group."""
        return tuple(len(p) for p in self.probs)

    @classmethod
    def from_aggregated(
        cls,
        sys: AggregatedSystem,
        m: float,
        alpha: float,
        subsets=None,
        probs=None,
    ) -> "GossipConfig":
        phi = sys.a11.toarray()
        if subsets is None:
            subsets = singleton_subsets(phi)
        return cls(
            phi=phi,
            u=sys.u,
            n=sys.n,
            m=m,
            alpha=alpha,
            subsets=tuple(tuple(tuple(s) for s in subs) for subs in subsets),
            probs=() if probs is None else tuple(np.asarray(p, float) for p in probs),
        )


@dataclass
class ProbabilityReport:
    """Violations of the update-probability conditions, if any."""

    ok: bool
    violations: list[tuple[int, int, str]]


def validate_update_probabilities(config: GossipConfig) -> ProbabilityReport:
    """Check, per group, the sum-to-one condition and that each transmit
    probability is at least ``alpha`` times its subset's weight (and at
    most 1). Reports violations instead of raising."""
    violations: list[tuple[int, int, str]] = []
    for i in range(config.r):
        p = config.probs[i]
        if abs(p.sum() - 1.0) > PROB_ATOL:
            violations.append((i, -1, f"probabilities sum to {p.sum()!r}, not 1"))
        for ell, subset in enumerate(config.subsets[i], start=1):
            lower = config.alpha * sum(config.phi[j, i] for j in subset)
            if p[ell] < lower - PROB_ATOL:
                violations.append(
                    (i, ell, f"probability {p[ell]:.6g} below lower bound {lower:.6g}")
                )
            if p[ell] > 1.0 + PROB_ATOL:
                violations.append((i, ell, f"probability {p[ell]:.6g} exceeds 1"))
    return ProbabilityReport(ok=not violations, violations=violations)


def realize_link_matrix(config: GossipConfig, q) -> np.ndarray:
    """The column-stochastic matrix realized by per-group choices ``q``.

    Column ``i`` is the unit vector ``e_i`` when ``q_i`` is 0; otherwise
    it scatters ``(alpha / prob) phi[p, i]`` to the members ``p`` of the
    chosen subset, with the diagonal absorbing the rest of the mass.
    """
    r = config.r
    q = np.asarray(q, dtype=np.int64)
    if q.shape != (r,):
        raise ValueError(f"need one choice per group, got shape {q.shape}")
    out = np.zeros((r, r))
    for i in range(r):
        ell = int(q[i])
        if ell < 0 or ell > len(config.subsets[i]):
            raise ValueError(f"choice {ell} out of range for group {i}")
        if ell == 0:
            out[i, i] = 1.0
            continue
        subset = config.subsets[i][ell - 1]
        scale = config.alpha / config.probs[i][ell]
        transferred = 0.0
        for p in subset:
            out[p, i] = scale * config.phi[p, i]
            transferred += scale * config.phi[p, i]
        out[i, i] += 1.0 - transferred
    return out


def mean_matrices(config: GossipConfig):
    """Expected link matrix and expected damped update matrix.

    The expectation is computed two ways, columnwise over each group's
    choice distribution and by the closed form ``alpha phi +
    (1-alpha) I``; disagreement beyond 1e-12 raises
    :class:`InternalConsistencyError`.
    """
    r = config.r
    expected = np.zeros((r, r))
    for i in range(r):
        column = np.zeros(r)
        for ell, prob in enumerate(config.probs[i]):
            if ell == 0:
                column[i] += prob
                continue
            subset = config.subsets[i][ell - 1]
            scale = config.alpha / config.probs[i][ell]
            transferred = 0.0
            for p in subset:
                column[p] += prob * scale * config.phi[p, i]
                transferred += scale * config.phi[p, i]
            column[i] += prob * (1.0 - transferred)
        expected[:, i] = column
    closed = config.alpha * config.phi + (1.0 - config.alpha) * np.eye(r)
    if np.abs(expected - closed).max() > 1e-12:
        raise InternalConsistencyError(
            "columnwise expectation of the link matrices disagrees with the closed form"
        )
    m_hat = config.m_hat
    gamma_bar = (1.0 - m_hat) * closed + (m_hat / config.n) * np.outer(
        config.u, np.ones(r)
    )
    return closed, gamma_bar


def enumerate_realizations(config: GossipConfig):
    """All (probability, choices) pairs over the product choice space.

    Exponential in the group count; intended for small fixtures.
    """
    ranges = [range(len(p)) for p in config.probs]
    for q in product(*ranges):
        weight = 1.0
        for i, ell in enumerate(q):
            weight *= config.probs[i][ell]
        yield weight, np.array(q, dtype=np.int64)


def _scatter_tables(config: GossipConfig):
    """Per (group, choice >= 1): target rows, scaled values, the diagonal
    adjustment relative to silence, and the message count."""
    tables = []
    for i in range(config.r):
        per_group = [None]  # index 0 = silence
        for ell, subset in enumerate(config.subsets[i], start=1):
            rows = np.array(subset, dtype=np.int64)
            scale = config.alpha / config.probs[i][ell]
            vals = scale * config.phi[rows, i]
            per_group.append((rows, vals, -float(vals.sum()), len(subset)))
        tables.append(per_group)
    return tables


def _apply_choices(tables, xi, choices):
    """Scatter pass of one update: ``Phi_choices xi`` plus message count.

    Silent groups contribute identity, so the walk starts from ``xi`` and
    only firing groups adjust it.
    """
    nxt = xi.copy()
    messages = 0
    for i in np.nonzero(choices)[0]:
        rows, vals, diag_shift, nmsg = tables[i][choices[i]]
        nxt[rows] += vals * xi[i]
        nxt[i] += diag_shift * xi[i]
        messages += nmsg
    return nxt, messages


def gossip_step(config: GossipConfig, xi: np.ndarray, choices) -> tuple[np.ndarray, int]:
    """One sparse update ``xi <- (1-m_hat) Phi_choices xi + (m_hat/n) u``.

    Only firing columns scatter value; no dense realized matrix is formed.
    Returns the next state and the number of messages sent (one per
    (sender group, receiver group) pair that fired).
    """
    scattered, messages = _apply_choices(
        _scatter_tables(config),
        np.asarray(xi, dtype=np.float64),
        np.asarray(choices, dtype=np.int64),
    )
    m_hat = config.m_hat
    return (1.0 - m_hat) * scattered + (m_hat / config.n) * config.u, messages


@dataclass
class SimulationTrace:
    """Sampled records of one seeded gossip run.

    Arrays are aligned: row ``t`` describes step ``ks[t]``. ``err_sq_psi``
    is the squared 2-norm distance of the running average from the
    stationary group vector ``xi_ref``.
    """

    seed: int
    steps: int
    stride: int
    xi_ref: np.ndarray
    ks: np.ndarray
    xi: np.ndarray
    psi: np.ndarray
    err_sq_psi: np.ndarray
    mass: np.ndarray
    messages: np.ndarray


def draw_choices(config: GossipConfig, steps: int, seed: int) -> np.ndarray:
    """Pre-draw the per-step subset choices, one PCG64 stream per group."""
    r = config.r
    draws = np.zeros((steps, r), dtype=np.int64)
    for i in range(r):
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, i))))
        k = len(config.probs[i])
        if k == 1:
            continue  # degenerate group: always silent
        draws[:, i] = gen.choice(k, size=steps, p=config.probs[i])
    return draws


def simulate_gossip(
    config: GossipConfig,
    steps: int,
    seed: int,
    stride: int = 1,
    xi0: np.ndarray | None = None,
    xi_ref: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
) -> SimulationTrace:
    """Run the randomized update scheme for ``steps`` steps.

    The state starts at ``xi0`` (default uniform over groups) and the
    running average follows ``psi(k) = (k psi(k-1) + xi(k)) / (k+1)``.
    Records are taken at step 0, every ``stride`` steps, and at the final
    step. ``xi_ref`` defaults to the stationary vector of the underlying
    deterministic recursion.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    report = validate_update_probabilities(config)
    if not report.ok:
        raise ValueError(f"invalid update probabilities: {report.violations[:3]}")
    r = config.r
    if xi0 is None:
        xi = np.full(r, 1.0 / r)
    else:
        xi = _check_probability_vector(xi0, "xi0").copy()
    if xi_ref is None:
        xi_ref, _, _ = aggregated_pagerank(
            config.phi, config.u, config.n, m=config.m, tol=tol,
            max_iter=DEFAULT_MAX_ITER,
        )

    draws = draw_choices(config, steps, seed)
    tables = _scatter_tables(config)
    m_hat = config.m_hat
    damp = 1.0 - m_hat
    offset = (m_hat / config.n) * config.u

    ks, xis, psis, errs, masses, msgs = [], [], [], [], [], []
    psi = xi.copy()
    total_messages = 0

    def record(k):
        ks.append(k)
        xis.append(xi.copy())
        psis.append(psi.copy())
        errs.append(float(((psi - xi_ref) ** 2).sum()))
        masses.append(float(xi.sum()))
        msgs.append(total_messages)

    record(0)
    for k in range(1, steps + 1):
        scattered, sent = _apply_choices(tables, xi, draws[k - 1])
        xi = damp * scattered + offset
        total_messages += sent
        psi = (k * psi + xi) / (k + 1.0)
        if k % stride == 0 or k == steps:
            record(k)

    return SimulationTrace(
        seed=seed,
        steps=steps,
        stride=stride,
        xi_ref=np.asarray(xi_ref, dtype=np.float64),
        ks=np.array(ks, dtype=np.int64),
        xi=np.array(xis),
        psi=np.array(psis),
        err_sq_psi=np.array(errs),
        mass=np.array(masses),
        messages=np.array(msgs, dtype=np.int64),
    )


def fit_loglog_slope(ks, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ks)``."""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = (ks > 0) & (values > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a slope")
    return float(np.polyfit(np.log(ks[keep]), np.log(values[keep]), 1)[0])
