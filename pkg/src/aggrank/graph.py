"""Directed web graphs: edge-list ingestion, dangling-node repair, link matrix.

Pages are 0-based contiguous integers. The link matrix is column
stochastic: column ``j`` holds ``1/n_j`` at the rows page ``j`` links to,
where ``n_j`` is the out-degree of ``j``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class EdgeListParseError(ValueError):
    """Malformed edge-list input; carries the offending 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EdgeIdRangeError(EdgeListParseError):
    """Page id outside the declared range."""


class IsolatedNodeError(ValueError):
    """A dangling page with no in-links cannot be repaired with back-links."""


@dataclass(frozen=True)
class WebGraph:
    """Immutable directed graph of pages with distinct, non-self out-links.

    ``out_links[j]`` is the ascending tuple of targets of page ``j``.
    ``self_loops_dropped`` counts self-edges discarded during construction;
    it is informational and excluded from equality.
    """

    out_links: tuple[tuple[int, ...], ...]
    self_loops_dropped: int = field(default=0, compare=False)

    @property
    def n(self) -> int:
        return len(self.out_links)

    @property
    def out_degrees(self) -> np.ndarray:
        return np.array([len(t) for t in self.out_links], dtype=np.int64)

    @property
    def edge_count(self) -> int:
        return sum(len(t) for t in self.out_links)

    def dangling_pages(self) -> list[int]:
        return [j for j, targets in enumerate(self.out_links) if not targets]

    def in_links(self) -> list[list[int]]:
        """Ascending in-neighbor lists, one per page."""
        incoming: list[list[int]] = [[] for _ in range(self.n)]
        for src, targets in enumerate(self.out_links):
            for tgt in targets:
                incoming[tgt].append(src)
        for lst in incoming:
            lst.sort()
        return incoming

    @classmethod
    def from_edges(cls, n: int, edges, self_loops_dropped: int = 0) -> "WebGraph":
        """Build a graph from (src, dst) pairs.

        Duplicate edges are collapsed and self-loops dropped (counted on the
        result). Ids must lie in ``[0, n)``.
        """
        if n <= 0:
            raise ValueError(f"page count must be positive, got {n}")
        targets: list[set[int]] = [set() for _ in range(n)]
        dropped = self_loops_dropped
        for src, dst in edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) outside page range [0, {n})")
            if src == dst:
                dropped += 1
                continue
            targets[src].add(dst)
        return cls(tuple(tuple(sorted(t)) for t in targets), dropped)


def parse_edge_list(source) -> WebGraph:
    """Parse the edge-list text format into a :class:`WebGraph`.

    Format: UTF-8 text, optional header line ``n <count>``, then one
    ``<src> <dst>`` pair per line; blank lines and ``#`` comments are
    skipped. Without a header, the page count is one plus the largest id
    seen. Duplicate edges are collapsed; self-loops are dropped and counted.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    declared_n: int | None = None
    edges: list[tuple[int, int]] = []
    max_id = -1
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if declared_n is None and not edges and parts[0] == "n":
            if len(parts) != 2:
                raise EdgeListParseError("header must be 'n <count>'", lineno)
            try:
                declared_n = int(parts[1])
            except ValueError:
                raise EdgeListParseError(f"bad page count {parts[1]!r}", lineno) from None
            if declared_n <= 0:
                raise EdgeListParseError(f"page count must be positive, got {declared_n}", lineno)
            continue
        if len(parts) != 2:
            raise EdgeListParseError(f"expected '<src> <dst>', got {line!r}", lineno)
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer page id in {line!r}", lineno) from None
        if src < 0 or dst < 0:
            raise EdgeIdRangeError(f"negative page id in {line!r}", lineno)
        if declared_n is not None and (src >= declared_n or dst >= declared_n):
            raise EdgeIdRangeError(
                f"page id {max(src, dst)} >= declared count {declared_n}", lineno
            )
        max_id = max(max_id, src, dst)
        edges.append((src, dst))

    n = declared_n if declared_n is not None else max_id + 1
    if n <= 0:
        raise EdgeListParseError("empty edge list without an 'n <count>' header")
    return WebGraph.from_edges(n, edges)


def load_edge_list(path) -> WebGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh)


def serialize_edge_list(g: WebGraph) -> str:
    """Serialize to the edge-list format (with header); inverse of parsing."""
    lines = [f"n {g.n}"]
    for src, targets in enumerate(g.out_links):
        lines.extend(f"{src} {dst}" for dst in targets)
    return "\n".join(lines) + "\n"


def repair_dangling(g: WebGraph, policy: str = "back-links") -> WebGraph:
    """Give every page at least one out-link.

    ``back-links`` adds, for each dangling page, reverse edges to all of its
    in-neighbors; a dangling page without in-links is unrepairable and
    raises :class:`IsolatedNodeError`. ``uniform`` links a dangling page to
    every other page instead. Idempotent: a graph without dangling pages is
    returned unchanged.
    """
    if policy not in ("back-links", "uniform"):
        raise ValueError(f"unknown policy {policy!r}")
    dangling = g.dangling_pages()
    if not dangling:
        return g
    targets = [list(t) for t in g.out_links]
    if policy == "back-links":
        incoming = g.in_links()
        for j in dangling:
            if not incoming[j]:
                raise IsolatedNodeError(
                    f"page {j} has no out-links and no in-links; "
                    "back-links repair is impossible (use the uniform policy)"
                )
            targets[j] = incoming[j]
    else:
        if g.n < 2:
            raise IsolatedNodeError("cannot repair a single isolated page")
        for j in dangling:
            targets[j] = [i for i in range(g.n) if i != j]
    return WebGraph(
        tuple(tuple(sorted(t)) for t in targets), g.self_loops_dropped
    )


def link_matrix(g: WebGraph) -> sparse.csc_array:
    """Column-stochastic link matrix: entry ``(i, j)`` is ``1/n_j`` for each
    edge ``j -> i``. Requires a repaired graph (no dangling pages)."""
    dangling = g.dangling_pages()
    if dangling:
        raise ValueError(
            f"graph has dangling pages {dangling[:5]}{'...' if len(dangling) > 5 else ''}; "
            "run repair_dangling first"
        )
    n = g.n
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(g.edge_count, dtype=np.int64)
    data = np.empty(g.edge_count, dtype=np.float64)
    pos = 0
    for j, targets in enumerate(g.out_links):
        k = len(targets)
        indices[pos:pos + k] = targets
        data[pos:pos + k] = 1.0 / k
        pos += k
        indptr[j + 1] = pos
    return sparse.csc_array((data, indices, indptr), shape=(n, n))
