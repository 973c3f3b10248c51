"""Command-line front end.

Subcommands: ``pagerank`` (power-method reference), ``aggregate``
(refine a grouping to a node-parameter bound), ``reduced`` (three-step
approximation with a bound report), ``gossip`` (seeded randomized
simulation traces), ``generate`` (random block webs), ``experiment``
(end-to-end sweep plus gossip comparison). CSV goes to ``--out`` or
stdout; JSON-lines summaries go to stdout, or stderr when stdout holds
the CSV.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .aggregation import (
    Partition,
    build_aggregated_system,
    load_groups,
    node_parameters,
    refine_partition,
    save_groups,
    verify_assumption,
)
from .baseline import power_method
from .gossip import GossipConfig, fit_loglog_slope, simulate_gossip
from .graph import link_matrix, load_edge_list, repair_dangling, serialize_edge_list
from .harness import load_experiment_config, run_experiment, write_csv
from .reduced import (
    error_bound_report,
    run_reduced_scheme,
)


def _load_graph(path, repair: str):
    g = load_edge_list(path)
    if repair != "none":
        g = repair_dangling(g, policy=repair)
    return g


def _emit_csv(rows, header, out_path):
    if out_path:
        write_csv(out_path, [dict(zip(header, row)) for row in rows])
        return sys.stdout
    writer = sys.stdout
    writer.write(",".join(header) + "\n")
    for row in rows:
        writer.write(",".join(str(v) for v in row) + "\n")
    return sys.stderr


def _add_graph_args(parser):
    parser.add_argument("--graph", required=True, help="edge-list file")
    parser.add_argument(
        "--repair", choices=("back-links", "uniform", "none"), default="back-links",
        help="dangling-page repair policy (default back-links)",
    )


def cmd_pagerank(args) -> int:
    g = _load_graph(args.graph, args.repair)
    result = power_method(link_matrix(g), m=args.m, tol=args.tol, max_iter=args.max_iter)
    rows = [(page, f"{v:.12g}") for page, v in enumerate(result.values)]
    _emit_csv(rows, ("page", "value"), args.out)
    return 0


def _initial_partition(args, n: int) -> Partition:
    if args.groups:
        return load_groups(args.groups, n)
    if args.by_blocks:
        sizes = tuple(int(s) for s in args.by_blocks.split(","))
        if sum(sizes) != n:
            raise SystemExit(f"--by-blocks sizes sum to {sum(sizes)}, graph has {n} pages")
        return Partition.from_block_sizes(sizes)
    raise SystemExit("provide --groups FILE or --by-blocks SIZES")


def cmd_aggregate(args) -> int:
    g = _load_graph(args.graph, args.repair)
    initial = _initial_partition(args, g.n)
    refined = refine_partition(g, initial, args.delta)
    if args.out_groups:
        save_groups(refined, args.out_groups)
    report = verify_assumption(g, refined, args.delta)
    params = report.node_params
    print(json.dumps({
        "delta": args.delta,
        "r": refined.r,
        "singles": refined.singles_count,
        "ok": report.ok,
        "mean_node_param": float(params.mean()),
        "max_node_param": float(params.max()),
    }))
    return 0


def cmd_reduced(args) -> int:
    g = _load_graph(args.graph, args.repair)
    p = load_groups(args.groups, g.n)
    A = link_matrix(g)
    sys_ = build_aggregated_system(A, p)
    result = run_reduced_scheme(sys_, m=args.m, tol=args.tol)

    params = node_parameters(g, p)
    multi = p.sizes[p.page_to_group] > 1
    delta_used = float(params[multi].max()) if multi.any() else 0.0

    x_star = None
    if args.oracle:
        x_star = power_method(A, m=args.m, tol=args.tol).values
        rows = [
            (page, f"{xp:.12g}", f"{xs:.12g}", f"{abs(xp - xs):.6g}")
            for page, (xp, xs) in enumerate(zip(result.x_prime, x_star))
        ]
        header = ("page", "x_prime", "x_star", "abs_err")
    else:
        rows = [(page, f"{xp:.12g}") for page, xp in enumerate(result.x_prime)]
        header = ("page", "x_prime")
    summary_stream = _emit_csv(rows, header, args.out)

    bounds = error_bound_report(
        delta_used, args.m,
        x_star=x_star, transforms=sys_.transforms, x_prime=result.x_prime,
    )
    summary = {
        "delta": delta_used,
        "r": p.r,
        "singles": p.singles_count,
        "iterations": result.iterations,
        "epsilon_bound": bounds.epsilon_bound,
        "kappa": bounds.kappa,
        "kappa_over_m": bounds.kappa_over_m,
        "measured_error_1norm": bounds.measured_error_1norm,
    }
    summary.update(harness.operation_counts(A, sys_, None, result.iterations))
    summary_stream.write(json.dumps(summary) + "\n")
    return 0


def cmd_gossip(args) -> int:
    g = _load_graph(args.graph, args.repair)
    p = load_groups(args.groups, g.n)
    A = link_matrix(g)
    sys_ = build_aggregated_system(A, p)
    config = GossipConfig.from_aggregated(sys_, m=args.m, alpha=args.alpha)

    rows = []
    header = ["seed", "k", "err_sq_psi", "mass", "messages"]
    if args.dump_state:
        header += [f"xi_{i}" for i in range(config.r)]
        header += [f"psi_{i}" for i in range(config.r)]
    for seed in range(args.seeds):
        trace = simulate_gossip(
            config, steps=args.steps, seed=seed, stride=args.stride,
        )
        for t in range(len(trace.ks)):
            row = [seed, int(trace.ks[t]), f"{trace.err_sq_psi[t]:.12g}",
                   f"{trace.mass[t]:.12g}", int(trace.messages[t])]
            if args.dump_state:
                row += [f"{v:.12g}" for v in trace.xi[t]]
                row += [f"{v:.12g}" for v in trace.psi[t]]
            rows.append(row)
        positive = (trace.ks > 0) & (trace.err_sq_psi > 0)
        print(json.dumps({
            "seed": seed,
            "final_err_sq_psi": float(trace.err_sq_psi[-1]),
            "final_mass": float(trace.mass[-1]),
            "messages": int(trace.messages[-1]),
            "loglog_slope": (
                fit_loglog_slope(trace.ks[positive], trace.err_sq_psi[positive])
                if positive.sum() >= 2 else None
            ),
        }))
    _emit_csv(rows, tuple(header), args.out)
    return 0


def cmd_generate(args) -> int:
    config = load_experiment_config(args.spec) if args.spec else {
        "spec": harness.standard_block_spec(args.seed or 0)
    }
    spec = config["spec"]
    g = harness.generate_block_web(spec, seed=args.seed)
    text = serialize_edge_list(g)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.out_groups:
        save_groups(harness.initial_block_partition(spec), args.out_groups)
    return 0


def cmd_experiment(args) -> int:
    config = load_experiment_config(args.config) if args.config else dict(
        harness.DEFAULT_EXPERIMENT, spec=harness.standard_block_spec(0)
    )
    report = run_experiment(config, out_dir=args.out_dir)
    for row in report.summary:
        print(json.dumps(row))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggrank",
        description="Aggregation-based PageRank: reference, reduced-order, and gossip runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pagerank", help="full-order PageRank by the power method")
    _add_graph_args(p)
    p.add_argument("--m", type=float, default=0.15)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=10**6)
    p.add_argument("--out", help="CSV output file (default stdout)")
    p.set_defaults(func=cmd_pagerank)

    p = sub.add_parser("aggregate", help="refine a grouping to a node-parameter bound")
    _add_graph_args(p)
    p.add_argument("--groups", help="initial group file")
    p.add_argument("--by-blocks", help="initial contiguous block sizes, comma separated")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out-groups", help="write the refined group file here")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("reduced", help="three-step reduced-order approximation")
    _add_graph_args(p)
    p.add_argument("--groups", required=True)
    p.add_argument("--m", type=float, default=0.15)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--oracle", action="store_true",
                   help="also run the power method and report per-page errors")
    p.add_argument("--out", help="CSV output file (default stdout)")
    p.set_defaults(func=cmd_reduced)

    p = sub.add_parser("gossip", help="seeded randomized gossip simulation")
    _add_graph_args(p)
    p.add_argument("--groups", required=True)
    p.add_argument("--m", type=float, default=0.15)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=100000)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--dump-state", action="store_true",
                   help="include xi and psi columns in the trace")
    p.add_argument("--out", help="trace CSV file (default stdout)")
    p.set_defaults(func=cmd_gossip)

    p = sub.add_parser("generate", help="draw a random block web")
    p.add_argument("--spec", help="block-web spec file (flat key = value)")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--out", help="edge-list output file (default stdout)")
    p.add_argument("--out-groups", help="also write the dense blocks as a group file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("experiment", help="end-to-end sweep and gossip comparison")
    p.add_argument("--config", help="experiment config file (flat key = value)")
    p.add_argument("--out-dir", help="directory for graph.edges, groups.tsv, "
                                     "sweep.csv, trace.csv, summary.jsonl")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
