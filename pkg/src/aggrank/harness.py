"""Desk-scale experiments: random block webs, delta sweeps, gossip traces.

The generator produces graphs with dense diagonal blocks, optional
sparser overlay spans, and hub pages with many extra links; the dense
blocks double as the initial partition for grouping. Sweeps and the
end-to-end experiment write plain CSV / JSON-lines so plotting stays in
external tools. Every row carries enough of (seed, config) to be
re-derived exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import (
    Partition,
    build_aggregated_system,
    node_parameters,
    refine_partition,
)
from .baseline import power_method
from .gossip import GossipConfig, fit_loglog_slope, simulate_gossip
from .graph import WebGraph, link_matrix, repair_dangling, serialize_edge_list
from .reduced import deviation_solve_operator, run_reduced_scheme


class GenerationError(RuntimeError):
    """The random generator could not satisfy its postconditions."""


@dataclass(frozen=True)
class BlockWebSpec:
    """Parameters of the random block-web family.

    ``dense_blocks`` are contiguous block sizes summing to ``n``; each
    block's first page receives in-links from every other member.
    ``sparse_blocks`` are ``((start, end), density)`` overlay spans.
    Hub pages get ``hub_in_links`` extra in-links and ``hub_out_links``
    extra out-links from/to uniformly chosen pages.
    """

    n: int
    dense_blocks: tuple[int, ...]
    sparse_blocks: tuple[tuple[tuple[int, int], float], ...] = ()
    hub_pages: tuple[int, ...] = ()
    intra_density: float = 0.35
    inter_prob: float = 0.01
    hub_in_links: int = 60
    hub_out_links: int = 25
    seed: int = 0

    def __post_init__(self):
        if sum(self.dense_blocks) != self.n:
            raise ValueError("dense block sizes must sum to n")
        if any(b < 1 for b in self.dense_blocks):
            raise ValueError("dense block sizes must be positive")
        for (start, end), density in self.sparse_blocks:
            if not (0 <= start < end <= self.n):
                raise ValueError(f"bad sparse span ({start}, {end})")
            if not 0.0 < density <= 1.0:
                raise ValueError(f"sparse density must lie in (0, 1], got {density}")
        if not 0.0 < self.intra_density <= 1.0:
            raise ValueError("intra_density must lie in (0, 1]")
        if not 0.0 <= self.inter_prob <= 1.0:
            raise ValueError("inter_prob must lie in [0, 1]")
        if any(not 0 <= h < self.n for h in self.hub_pages):
            raise ValueError("hub pages out of range")

    def block_bounds(self) -> list[tuple[int, int]]:
        bounds = []
        start = 0
        for size in self.dense_blocks:
            bounds.append((start, start + size))
            start += size
        return bounds


def standard_block_spec(seed: int = 0) -> BlockWebSpec:
    """A 200-page spec: 12 dense blocks of 5 to 30 pages, two sparser
    overlay spans, and two hub pages at the span heads."""
    return BlockWebSpec(
        n=200,
        dense_blocks=(20, 30, 15, 25, 10, 20, 5, 18, 12, 15, 18, 12),
        sparse_blocks=(((0, 50), 0.04), ((50, 90), 0.04)),
        hub_pages=(0, 50),
        intra_density=0.35,
        inter_prob=0.006,
        hub_in_links=60,
        hub_out_links=25,
        seed=seed,
    )


def initial_block_partition(spec: BlockWebSpec) -> Partition:
    """The dense blocks as the initial grouping."""
    return Partition.from_block_sizes(spec.dense_blocks)


def generate_block_web(
    spec: BlockWebSpec, seed: int | None = None, max_retries: int = 100
) -> WebGraph:
    """Draw a block web; deterministic for a given (spec, seed).

    Dangling pages have their intra-block out-edges redrawn until every
    page links somewhere (bounded retries), so the result needs no
    dangling repair and back-links repair is a no-op on it.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n = spec.n
    adj = np.zeros((n, n), dtype=bool)
    bounds = spec.block_bounds()

    for start, end in bounds:
        size = end - start
        block = rng.random((size, size)) < spec.intra_density
        adj[start:end, start:end] |= block
        adj[start:end, start] = True  # every member links to the block head

    for (start, end), density in spec.sparse_blocks:
        span = rng.random((end - start, end - start)) < density
        adj[start:end, start:end] |= span

    if spec.inter_prob > 0.0:
        background = rng.random((n, n)) < spec.inter_prob
        intra_mask = np.zeros((n, n), dtype=bool)
        for start, end in bounds:
            intra_mask[start:end, start:end] = True
        adj |= background & ~intra_mask

    for hub in spec.hub_pages:
        others = np.delete(np.arange(n), hub)
        sources = rng.choice(others, size=min(spec.hub_in_links, n - 1), replace=False)
        targets = rng.choice(others, size=min(spec.hub_out_links, n - 1), replace=False)
        adj[sources, hub] = True
        adj[hub, targets] = True

    np.fill_diagonal(adj, False)

    block_of = np.empty(n, dtype=np.int64)
    for bi, (start, end) in enumerate(bounds):
        block_of[start:end] = bi
    for page in range(n):
        retries = 0
        while not adj[page].any():
            start, end = bounds[block_of[page]]
            if end - start > 1:
                row = rng.random(end - start) < spec.intra_density
                row[page - start] = False
                adj[page, start:end] |= row
            retries += 1
            if retries > max_retries:
                raise GenerationError(
                    f"page {page} still dangling after {max_retries} redraws"
                )

    sources, targets = np.nonzero(adj)
    return WebGraph.from_edges(n, zip(sources.tolist(), targets.tolist()))


@dataclass
class ExperimentReport:
    """Sweep rows, gossip trace rows, and per-case summaries.

    ``write`` emits ``sweep.csv``, ``trace.csv`` and ``summary.jsonl``
    into a directory.
    """

    config: dict
    sweep_rows: list[dict] = field(default_factory=list)
    trace_rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", self.sweep_rows)
        write_csv(out / "trace.csv", self.trace_rows)
        with open(out / "summary.jsonl", "w", encoding="utf-8") as fh:
            for row in self.summary:
                fh.write(json.dumps(row) + "\n")


def write_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def operation_counts(A, sys, full_iters: int | None, reduced_iters: int | None,
                     a_ext=None) -> dict:
    """Nonzero and iteration counters comparing full and reduced runs."""
    counts = {
        "nnz_full": int(A.nnz),
        "nnz_reduced": int(sys.a11.nnz),
        "iters_full": full_iters,
        "iters_reduced": reduced_iters,
    }
    if a_ext is not None:
        counts["nnz_external"] = int(a_ext.nnz)
    return counts


def delta_sweep(
    g: WebGraph,
    initial: Partition,
    deltas,
    m: float = 0.15,
    tol: float = 1e-10,
    seed: int | None = None,
) -> ExperimentReport:
    """Refine, reduce and measure at each node-parameter bound.

    Each row records the bound, the group count it produced, the 1-norm
    error of the reduced steady state against the power-method reference,
    the mean node parameter, and operation counters. The group count is
    typically but not necessarily nonincreasing in the bound.
    """
    A = link_matrix(g)
    reference = power_method(A, m=m, tol=tol)
    rows = []
    for delta in deltas:
        refined = refine_partition(g, initial, delta)
        sys = build_aggregated_system(A, refined)
        result = run_reduced_scheme(sys, m=m, tol=tol)
        params = node_parameters(g, refined)
        row = {
            "delta": float(delta),
            "r": refined.r,
            "singles": refined.singles_count,
            "err_1norm": float(np.abs(result.x_prime - reference.values).sum()),
            "mean_node_param": float(params.mean()),
            "max_node_param": float(params.max()),
            "seed": seed,
        }
        row.update(operation_counts(A, sys, reference.iterations, result.iterations))
        rows.append(row)
    return ExperimentReport(
        config={"m": m, "tol": tol, "deltas": [float(d) for d in deltas], "seed": seed},
        sweep_rows=rows,
    )


def subsets_from_initial_blocks(
    phi: np.ndarray, refined: Partition, initial: Partition
) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """Partition each group's out-neighbors by originating initial block.

    Refinement only splits groups, so every refined group lies inside one
    initial block; neighbors from the same block share a transmission
    subset.
    """
    block_of_group = np.array(
        [initial.page_to_group[members[0]] for members in refined.groups]
    )
    subsets = []
    for i in range(phi.shape[0]):
        nbrs = [j for j in range(phi.shape[0]) if j != i and phi[j, i] > 0.0]
        by_block: dict[int, list[int]] = {}
        for j in nbrs:
            by_block.setdefault(int(block_of_group[j]), []).append(j)
        subsets.append(tuple(tuple(v) for _, v in sorted(by_block.items())))
    return tuple(subsets)


DEFAULT_EXPERIMENT = {
    "m": 0.15,
    "alpha": 0.5,
    "tol": 1e-10,
    "delta_coarse": 0.2,
    "delta_fine": 0.01,
    "deltas": (0.02, 0.05, 0.08, 0.12, 0.16, 0.2, 0.3, 0.4, 0.5, 0.7),
    "steps": 20000,
    "stride": 200,
    "seeds": 3,
    "seed": 0,
}


def load_experiment_config(path) -> dict:
    """Parse the flat ``key = value`` config format (see README)."""
    raw: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            raw[key.strip()] = value.strip()
    return parse_experiment_config(raw)


def _parse_spans(text: str):
    spans = []
    for item in text.split(","):
        rng_part, density = item.split(":")
        start, end = rng_part.split("-")
        spans.append(((int(start), int(end)), float(density)))
    return tuple(spans)


def parse_experiment_config(raw: dict) -> dict:
    """Coerce string config values onto the experiment schema."""
    config = dict(DEFAULT_EXPERIMENT)
    spec_kwargs = {}
    for key, value in raw.items():
        if key in ("n", "steps", "stride", "seeds", "seed", "hub_in_links", "hub_out_links"):
            parsed = int(value)
        elif key in ("m", "alpha", "tol", "delta_coarse", "delta_fine",
                     "intra_density", "inter_prob"):
            parsed = float(value)
        elif key == "deltas":
            parsed = tuple(float(v) for v in str(value).split(","))
        elif key == "dense_blocks":
            parsed = tuple(int(v) for v in str(value).split(","))
        elif key == "sparse_blocks":
            parsed = _parse_spans(str(value)) if isinstance(value, str) else tuple(value)
        elif key == "hub_pages":
            parsed = tuple(int(v) for v in str(value).split(","))
        else:
            raise ValueError(f"unknown experiment config key {key!r}")
        if key in ("n", "dense_blocks", "sparse_blocks", "hub_pages",
                   "intra_density", "inter_prob", "hub_in_links", "hub_out_links"):
            spec_kwargs[key] = parsed
        else:
            config[key] = parsed
    if spec_kwargs:
        spec_kwargs.setdefault("seed", config["seed"])
        config["spec"] = BlockWebSpec(**spec_kwargs)
    else:
        config["spec"] = standard_block_spec(config["seed"])
    return config


def run_experiment(config: dict, out_dir=None) -> ExperimentReport:
    """Generate a block web, sweep delta, and compare gossip traces.

    Two gossip cases run on the same graph: a coarse aggregation at
    ``delta_coarse`` and a near-full-order one at ``delta_fine``. Each
    sampled running average is lifted back to page coordinates through
    the deviation solve, and its 1-norm error against the power-method
    reference is recorded. Writes ``graph.edges`` and ``groups.tsv``
    alongside the report files when ``out_dir`` is given.
    """
    config = dict(config)
    spec: BlockWebSpec = config.get("spec") or standard_block_spec(config.get("seed", 0))
    m, alpha, tol = config["m"], config["alpha"], config["tol"]

    g = generate_block_web(spec, seed=config.get("seed"))
    g = repair_dangling(g)
    initial = initial_block_partition(spec)
    A = link_matrix(g)
    reference = power_method(A, m=m, tol=tol)

    report = delta_sweep(g, initial, config["deltas"], m=m, tol=tol,
                         seed=config.get("seed"))
    report.config = {
        **{k: v for k, v in config.items() if k != "spec"},
        "spec": asdict(spec),
    }

    groups_written = None
    for case, delta in (("coarse", config["delta_coarse"]),
                        ("fine", config["delta_fine"])):
        refined = refine_partition(g, initial, delta)
        sys = build_aggregated_system(A, refined)
        subsets = subsets_from_initial_blocks(sys.a11.toarray(), refined, initial)
        gcfg = GossipConfig.from_aggregated(sys, m=m, alpha=alpha, subsets=subsets)
        solve_op = deviation_solve_operator(sys, m)
        reduced = run_reduced_scheme(sys, m=m, tol=tol)
        if case == "coarse":
            groups_written = refined

        final_errors = []
        slopes = []
        for seed in range(config["seeds"]):
            trace = simulate_gossip(
                gcfg, steps=config["steps"], seed=seed, stride=config["stride"],
                xi_ref=reduced.xi_prime,
            )
            for t in range(len(trace.ks)):
                psi = trace.psi[t]
                x2 = (1.0 - m) * (solve_op @ psi)
                x_page = sys.transforms.apply_w1(psi) + sys.transforms.apply_w2(x2)
                report.trace_rows.append({
                    "case": case,
                    "delta": float(delta),
                    "seed": seed,
                    "k": int(trace.ks[t]),
                    "err_x_1norm": float(np.abs(x_page - reference.values).sum()),
                    "err_sq_psi": float(trace.err_sq_psi[t]),
                    "mass": float(trace.mass[t]),
                    "messages": int(trace.messages[t]),
                })
            final_errors.append(report.trace_rows[-1]["err_x_1norm"])
            positive = (trace.ks > 0) & (trace.err_sq_psi > 0)
            slopes.append(
                fit_loglog_slope(trace.ks[positive], trace.err_sq_psi[positive])
                if positive.sum() >= 2 else None
            )

        report.summary.append({
            "case": case,
            "delta": float(delta),
            "r": refined.r,
            "singles": refined.singles_count,
            "err_reduced_1norm": float(np.abs(reduced.x_prime - reference.values).sum()),
            "final_gossip_errors": final_errors,
            "mean_final_gossip_error": float(np.mean(final_errors)),
            "psi_loglog_slopes": slopes,
            **operation_counts(A, sys, reference.iterations, reduced.iterations),
        })

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "graph.edges").write_text(serialize_edge_list(g), encoding="utf-8")
        if groups_written is not None:
            lines = [
                f"{page}\t{gid}"
                for page, gid in enumerate(groups_written.page_to_group)
            ]
            (out / "groups.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        report.write(out)
    return report
