"""Grouping of pages and the reduced-order operator bundle.

A partition of the pages into ``r`` groups induces a coordinate change
``x -> (x1, x2)`` where ``x1`` holds per-group totals and ``x2`` holds
within-group deviations from the group mean (one coordinate per group
member except the last). The forward maps are applied by ``apply_v1`` /
``apply_v2`` and the inverse by ``apply_w1`` / ``apply_w2``; none of the
four is ever materialized densely.

In these coordinates the link matrix splits into a small ``r x r``
column-stochastic coupling matrix (``a11``), a deviation-drive matrix
(``a21``) and a block-diagonal within-group matrix (``a22p_blocks``),
which together drive the reduced scheme in :mod:`aggrank.reduced`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .graph import WebGraph

NODE_PARAM_MODES = ("all-external", "multi-target")


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of pages covering ``[0, n)``.

    Group members are stored ascending; group ids follow list order.
    """

    groups: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        seen = np.zeros(self.n, dtype=bool)
        for gi, members in enumerate(self.groups):
            if not members:
                raise ValueError(f"group {gi} is empty")
            arr = np.asarray(members)
            if np.any(arr < 0) or np.any(arr >= self.n):
                raise ValueError(f"group {gi} has out-of-range pages")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"group {gi} members must be strictly ascending")
            if seen[arr].any():
                raise ValueError(f"group {gi} overlaps another group")
            seen[arr] = True
        if not seen.all():
            missing = int(np.flatnonzero(~seen)[0])
            raise ValueError(f"page {missing} is not assigned to any group")

    @property
    def r(self) -> int:
        return len(self.groups)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups], dtype=np.int64)

    @cached_property
    def page_to_group(self) -> np.ndarray:
        h = np.empty(self.n, dtype=np.int64)
        for gi, members in enumerate(self.groups):
            h[list(members)] = gi
        return h

    @property
    def singles_count(self) -> int:
        return int(np.count_nonzero(self.sizes == 1))

    @classmethod
    def from_groups(cls, groups, n: int) -> "Partition":
        return cls(tuple(tuple(sorted(g)) for g in groups), n)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Build from a page -> group-id array; ids must be 0-based contiguous."""
        labels = np.asarray(labels, dtype=np.int64)
        n = labels.size
        if n == 0:
            raise ValueError("empty label array")
        r = int(labels.max()) + 1
        if labels.min() < 0:
            raise ValueError("negative group id")
        groups: list[list[int]] = [[] for _ in range(r)]
        for page, gi in enumerate(labels):
            groups[gi].append(page)
        if any(not g for g in groups):
            raise ValueError("group ids must be contiguous (empty id encountered)")
        return cls(tuple(tuple(g) for g in groups), n)

    @classmethod
    def singles(cls, n: int) -> "Partition":
        return cls(tuple((p,) for p in range(n)), n)

    @classmethod
    def all_in_one(cls, n: int) -> "Partition":
        return cls((tuple(range(n)),), n)

    @classmethod
    def from_block_sizes(cls, sizes) -> "Partition":
        """Contiguous blocks of the given sizes, in order."""
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        return cls(
            tuple(tuple(range(int(a), int(b))) for a, b in zip(bounds[:-1], bounds[1:])),
            int(bounds[-1]),
        )


class BlockTransforms:
    """The group coordinate change and its inverse, applied as operators.

    Forward: ``apply_v1`` sums each group; ``apply_v2`` maps each group
    member except the last to its deviation from the group mean. Inverse:
    ``apply_w1`` gives every member ``value / size`` of its group;
    ``apply_w2`` scatters deviations back, with each group's last member
    receiving minus the sum of the others. ``w1(v1(x)) + w2(v2(x)) = x``.
    """

    def __init__(self, partition: Partition):
        self.partition = partition
        p = partition
        self._sizes = p.sizes
        self._h = p.page_to_group
        # multi-member groups in group order define the deviation layout
        self.multi_groups = tuple(
            gi for gi in range(p.r) if len(p.groups[gi]) > 1
        )
        kept: list[int] = []
        kept_block: list[int] = []
        last: list[int] = []
        offsets: list[int] = [0]
        for bi, gi in enumerate(self.multi_groups):
            members = p.groups[gi]
            kept.extend(members[:-1])
            kept_block.extend([bi] * (len(members) - 1))
            last.append(members[-1])
            offsets.append(offsets[-1] + len(members) - 1)
        self._kept = np.array(kept, dtype=np.int64)
        self._kept_block = np.array(kept_block, dtype=np.int64)
        self._last = np.array(last, dtype=np.int64)
        self._block_offsets = np.array(offsets[:-1], dtype=np.int64)

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def r(self) -> int:
        return self.partition.r

    @property
    def deviation_dim(self) -> int:
        return self.n - self.r

    def apply_v1(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.bincount(self._h, weights=x, minlength=self.r)

    def apply_v2(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.deviation_dim == 0:
            return np.zeros(0)
        means = self.apply_v1(x) / self._sizes
        return x[self._kept] - means[self._h[self._kept]]

    def apply_w1(self, x1: np.ndarray) -> np.ndarray:
        x1 = np.asarray(x1, dtype=np.float64)
        if x1.shape != (self.r,):
            raise ValueError(f"expected length-{self.r} group vector, got {x1.shape}")
        return (x1 / self._sizes)[self._h]

    def apply_w2(self, x2: np.ndarray) -> np.ndarray:
        x2 = np.asarray(x2, dtype=np.float64)
        if x2.shape != (self.deviation_dim,):
            raise ValueError(
                f"expected length-{self.deviation_dim} deviation vector, got {x2.shape}"
            )
        out = np.zeros(self.n)
        if self.deviation_dim:
            out[self._kept] = x2
            block_sums = np.bincount(
                self._kept_block, weights=x2, minlength=len(self.multi_groups)
            )
            out[self._last] = -block_sums
        return out

    def group_members(self, block_index: int) -> tuple[int, ...]:
        """Members of the multi-member group backing deviation block ``block_index``."""
        return self.partition.groups[self.multi_groups[block_index]]


def project_to_group_coords(x: np.ndarray, t: BlockTransforms):
    """Split a page vector into (group totals, within-group deviations)."""
    return t.apply_v1(x), t.apply_v2(x)


def lift_from_group_coords(x1: np.ndarray, x2: np.ndarray, t: BlockTransforms) -> np.ndarray:
    """Invert :func:`project_to_group_coords`."""
    return t.apply_w1(x1) + t.apply_w2(x2)


def load_groups(path, n: int | None = None) -> Partition:
    """Read the group-file format: one ``<page_id> <group_id>`` pair per
    line, whitespace separated, group ids 0-based contiguous."""
    assignments: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<page_id> <group_id>'")
            page, gid = int(parts[0]), int(parts[1])
            if page in assignments:
                raise ValueError(f"{path}:{lineno}: page {page} assigned twice")
            assignments[page] = gid
    if not assignments:
        raise ValueError(f"{path}: empty group file")
    count = n if n is not None else max(assignments) + 1
    labels = np.full(count, -1, dtype=np.int64)
    for page, gid in assignments.items():
        if not 0 <= page < count:
            raise ValueError(f"{path}: page {page} outside [0, {count})")
        labels[page] = gid
    if np.any(labels < 0):
        missing = int(np.flatnonzero(labels < 0)[0])
        raise ValueError(f"{path}: page {missing} has no group assignment")
    return Partition.from_labels(labels)


def save_groups(p: Partition, path) -> None:
    """Write the group-file format (tab separated)."""
    lines = [f"{page}\t{gid}" for page, gid in enumerate(p.page_to_group)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def node_parameters(g: WebGraph, p: Partition, mode: str = "all-external") -> np.ndarray:
    """Per-page fraction of out-links leaving the page's own group.

    ``all-external`` (default) counts every out-link whose target lies in a
    different group. ``multi-target`` counts only targets in groups with
    more than one member. The default is the mode under which the
    2*delta bound on the zeroed external matrix holds (see
    :func:`decompose_link_matrix`).
    """
    if mode not in NODE_PARAM_MODES:
        raise ValueError(f"mode must be one of {NODE_PARAM_MODES}, got {mode!r}")
    if p.n != g.n:
        raise ValueError("partition and graph disagree on page count")
    dangling = g.dangling_pages()
    if dangling:
        raise ValueError(f"graph has dangling pages {dangling[:5]}; repair first")
    h = p.page_to_group
    sizes = p.sizes
    delta = np.empty(g.n)
    for i, targets in enumerate(g.out_links):
        if mode == "all-external":
            ext = sum(1 for t in targets if h[t] != h[i])
        else:
            ext = sum(1 for t in targets if h[t] != h[i] and sizes[h[t]] > 1)
        delta[i] = ext / len(targets)
    return delta


@dataclass
class AssumptionReport:
    """Outcome of checking the grouping criterion at a given bound."""

    ok: bool
    violators: list[int]
    delta: float
    node_params: np.ndarray


def verify_assumption(g: WebGraph, p: Partition, delta: float) -> AssumptionReport:
    """Check that every page in a multi-member group has node parameter
    <= ``delta``; single groups are exempt."""
    params = node_parameters(g, p)
    sizes = p.sizes
    h = p.page_to_group
    violators = [
        i for i in range(g.n) if sizes[h[i]] > 1 and params[i] > delta
    ]
    return AssumptionReport(ok=not violators, violators=violators, delta=delta,
                            node_params=params)


def refine_partition(g: WebGraph, initial: Partition, delta: float) -> Partition:
    """Eject pages violating the node-parameter bound into single groups.

    Each pass ejects every page in a multi-member group whose parameter
    exceeds ``delta`` (ascending page id, appended as new single groups),
    then recomputes the parameters; passes repeat until none violate.
    Groups only shrink, so the procedure terminates. Deterministic.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    groups = [list(members) for members in initial.groups]
    while True:
        current = Partition.from_groups(groups, g.n)
        report = verify_assumption(g, current, delta)
        if report.ok:
            return current
        ejected = set(report.violators)
        groups = [
            [m for m in members if m not in ejected]
            for members in groups
        ]
        groups = [members for members in groups if members]
        groups.extend([v] for v in sorted(ejected))


@dataclass(frozen=True)
class Decomposition:
    """Split of a column-stochastic ``A`` into ``I + a_int + a_ext``.

    ``a_int`` keeps within-group off-diagonal entries, ``a_ext`` the
    cross-group ones; both get compensating diagonals so every column sums
    to zero. ``a_ext0`` is ``a_ext`` with the columns of single-group
    source pages zeroed; its 1-norm is at most twice the node-parameter
    bound the partition satisfies.
    """

    a_int: sparse.csc_array
    a_ext: sparse.csc_array
    a_ext0: sparse.csc_array


def decompose_link_matrix(A, p: Partition) -> Decomposition:
    """Build the internal/external split of a column-stochastic matrix."""
    A = sparse.csc_array(A)
    n = A.shape[0]
    if p.n != n:
        raise ValueError("partition and matrix disagree on page count")
    h = p.page_to_group
    sizes = p.sizes

    int_rows: list[int] = []
    int_cols: list[int] = []
    int_vals: list[float] = []
    ext_rows: list[int] = []
    ext_cols: list[int] = []
    ext_vals: list[float] = []
    indptr, indices, data = A.indptr, A.indices, A.data
    for j in range(n):
        int_sum = 0.0
        ext_sum = 0.0
        for k in range(indptr[j], indptr[j + 1]):
            i = indices[k]
            v = data[k]
            if i == j or v == 0.0:
                continue
            if h[i] == h[j]:
                int_rows.append(i); int_cols.append(j); int_vals.append(v)
                int_sum += v
            else:
                ext_rows.append(i); ext_cols.append(j); ext_vals.append(v)
                ext_sum += v
        if int_sum:
            int_rows.append(j); int_cols.append(j); int_vals.append(-int_sum)
        if ext_sum:
            ext_rows.append(j); ext_cols.append(j); ext_vals.append(-ext_sum)

    def build(rows, cols, vals):
        mat = sparse.csc_array(
            (vals, (rows, cols)), shape=(n, n), dtype=np.float64
        )
        mat.sort_indices()
        return mat

    a_int = build(int_rows, int_cols, int_vals)
    a_ext = build(ext_rows, ext_cols, ext_vals)

    keep = sizes[h] > 1  # columns of multi-group source pages survive
    mask = sparse.csc_array(
        (keep.astype(np.float64), (np.arange(n), np.arange(n))), shape=(n, n)
    )
    a_ext0 = sparse.csc_array(a_ext @ mask)
    a_ext0.eliminate_zeros()
    return Decomposition(a_int=a_int, a_ext=a_ext, a_ext0=a_ext0)


@dataclass(frozen=True)
class AggregatedSystem:
    """Operator bundle driving the reduced-order scheme.

    ``a11`` is the ``r x r`` column-stochastic group coupling matrix,
    ``a21`` maps group totals into the deviation coordinates, and
    ``a22p_blocks`` holds one dense ``(size-1) x (size-1)`` within-group
    block per multi-member group (aligned with
    ``transforms.multi_groups``). ``u`` is the group-size vector.
    """

    a11: sparse.csc_array
    a21: sparse.csc_array
    a22p_blocks: tuple[np.ndarray, ...]
    u: np.ndarray
    transforms: BlockTransforms

    @property
    def r(self) -> int:
        return self.transforms.r

    @property
    def n(self) -> int:
        return self.transforms.n

    def a22p_dense(self) -> np.ndarray:
        """Assemble the block-diagonal within-group matrix (small systems)."""
        dim = self.transforms.deviation_dim
        out = np.zeros((dim, dim))
        off = 0
        for block in self.a22p_blocks:
            k = block.shape[0]
            out[off:off + k, off:off + k] = block
            off += k
        return out

    def spectral_radius_a22p(self) -> float:
        """Largest block spectral radius; at most 1 for valid systems."""
        radius = 0.0
        for block in self.a22p_blocks:
            if block.size:
                radius = max(radius, float(np.abs(np.linalg.eigvals(block)).max()))
        return radius


def _group_indicator(p: Partition) -> sparse.csc_array:
    """n x r matrix with a 1 at (page, group)."""
    n, r = p.n, p.r
    return sparse.csc_array(
        (np.ones(n), (np.arange(n), p.page_to_group)), shape=(n, r)
    )


def build_aggregated_system(A, p: Partition) -> AggregatedSystem:
    """Assemble the reduced operator bundle for a column-stochastic ``A``.

    Entry ``(j, i)`` of ``a11`` is the total weight flowing from group ``i``
    to group ``j``, divided by the size of group ``i``; its columns sum
    to 1 exactly (up to roundoff). The within-group blocks are built from
    the internal part of each group's submatrix.
    """
    A = sparse.csc_array(A)
    if p.n != A.shape[0]:
        raise ValueError("partition and matrix disagree on page count")
    t = BlockTransforms(p)
    H = _group_indicator(p)
    sizes = p.sizes.astype(np.float64)

    group_cols = sparse.csc_array(A @ H)  # column i: A applied to group-i indicator
    a11 = sparse.csc_array((H.T @ group_cols) @ sparse.diags_array(1.0 / sizes))
    a11.sort_indices()
    a11.eliminate_zeros()

    # a21: deviation coordinates of A @ w1-basis columns
    dim = t.deviation_dim
    if dim:
        dense_cols = group_cols.toarray() / sizes[None, :]
        a21_dense = np.column_stack(
            [t.apply_v2(dense_cols[:, i]) for i in range(p.r)]
        )
        a21 = sparse.csc_array(a21_dense)
        a21.eliminate_zeros()
    else:
        a21 = sparse.csc_array((0, p.r), dtype=np.float64)

    blocks: list[np.ndarray] = []
    for gi in t.multi_groups:
        members = np.array(p.groups[gi])
        ng = members.size
        sub = A[np.ix_(members, members)].toarray()
        np.fill_diagonal(sub, 0.0)
        internal = sub - np.diag(sub.sum(axis=0))
        v2b = np.hstack([np.eye(ng - 1), np.zeros((ng - 1, 1))]) - np.ones((ng - 1, ng)) / ng
        w2b = np.vstack([np.eye(ng - 1), -np.ones((1, ng - 1))])
        blocks.append(np.eye(ng - 1) + v2b @ internal @ w2b)

    return AggregatedSystem(
        a11=a11,
        a21=a21,
        a22p_blocks=tuple(blocks),
        u=p.sizes.astype(np.float64),
        transforms=t,
    )
