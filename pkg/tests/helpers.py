"""Shared test utilities: random instances and brute-force oracles.

The dense constructions here are deliberately independent of the package
operator implementations; they build the coordinate-change matrices
explicitly from their block-diagonal definitions and check library
results against plain dense linear algebra.
"""

import numpy as np

from aggrank import Partition, WebGraph


def random_web(rng: np.random.Generator, n: int, max_out: int | None = None) -> WebGraph:
    """Random digraph where every page links to 1..max_out distinct others."""
    if max_out is None:
        max_out = max(1, n // 3)
    edges = []
    for src in range(n):
        k = int(rng.integers(1, max_out + 1))
        targets = rng.choice([t for t in range(n) if t != src], size=min(k, n - 1),
                             replace=False)
        edges.extend((src, int(t)) for t in targets)
    return WebGraph.from_edges(n, edges)


def random_partition(rng: np.random.Generator, n: int) -> Partition:
    """Random grouping with a mix of sizes, non-contiguous members."""
    r = int(rng.integers(1, n + 1))
    labels = rng.integers(0, r, size=n)
    # re-map to contiguous ids
    _, labels = np.unique(labels, return_inverse=True)
    return Partition.from_labels(labels)


def dense_transform_matrices(p: Partition):
    """Explicit dense V = [V1; V2] and W = V^-1 for a partition.

    Built from the block-diagonal definitions in group-sorted page order,
    then composed with the permutation taking page order to group order.
    """
    n, r = p.n, p.r
    perm = [page for members in p.groups for page in members]
    P = np.zeros((n, n))
    for row, page in enumerate(perm):
        P[row, page] = 1.0

    v1 = np.zeros((r, n))
    offset = 0
    for gi, members in enumerate(p.groups):
        v1[gi, offset:offset + len(members)] = 1.0
        offset += len(members)

    v2_rows = []
    offset = 0
    for members in p.groups:
        ng = len(members)
        if ng > 1:
            block = (np.hstack([np.eye(ng - 1), np.zeros((ng - 1, 1))])
                     - np.ones((ng - 1, ng)) / ng)
            rows = np.zeros((ng - 1, n))
            rows[:, offset:offset + ng] = block
            v2_rows.append(rows)
        offset += ng
    v2 = np.vstack(v2_rows) if v2_rows else np.zeros((0, n))

    V = np.vstack([v1, v2]) @ P
    W = np.linalg.inv(V)
    return V, W


def dense_pagerank(A: np.ndarray, m: float) -> np.ndarray:
    """Eigenvector PageRank from the dense teleportation matrix."""
    n = A.shape[0]
    M = (1.0 - m) * A + (m / n) * np.ones((n, n))
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmin(np.abs(vals - 1.0)))
    x = np.real(vecs[:, k])
    return x / x.sum()


def one_norm(M: np.ndarray) -> float:
    """Maximum absolute column sum."""
    return float(np.abs(M).sum(axis=0).max())
