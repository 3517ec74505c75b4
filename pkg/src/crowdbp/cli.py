"""Command-line interface.

Subcommands: ``simulate`` (write a synthetic dataset), ``infer`` (label a
dataset with one estimator), ``bench`` (run a configured sweep to CSV) and
``bounds`` (print the analytic error bounds).  Exit codes: 0 success,
2 parameter/validation error, 3 data-format error, 4 numeric degeneracy.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .errors import DataFormatError, GenerationError, NumericDegeneracyError, ParameterError
from .graph import generate_regular_bipartite, sample_answers, sample_ground_truth
from .harness import (Dataset, error_rate, load_dataset, load_experiment_config,
                      run_experiment, run_inference, save_dataset,
                      subsample_assignments, theoretical_bounds,
                      tree_probability_bound, write_metrics_csv)
from .priors import parse_prior_spec
from .seeding import child_seed


def _cmd_simulate(args: argparse.Namespace) -> int:
    prior = parse_prior_spec(args.prior)
    graph = generate_regular_bipartite(args.n, args.l, args.r, child_seed(args.seed, "graph"))
    truth = sample_ground_truth(graph, prior, child_seed(args.seed, "truth"))
    answers = sample_answers(graph, truth, child_seed(args.seed, "answers"))
    dataset = Dataset(graph=graph, answers=answers, truth_labels=truth.labels,
                      reliabilities=truth.reliabilities)
    save_dataset(dataset, args.out)
    print(f"wrote {graph.n_tasks} tasks, {graph.n_workers} workers, "
          f"{graph.n_edges} answers to {args.out}", file=sys.stderr)
    return 0


def _cmd_infer(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.data)
    if args.subsample_l is not None:
        dataset = subsample_assignments(dataset, args.subsample_l,
                                        child_seed(args.seed, "subsample"))
    report = run_inference(dataset, args.estimator, prior_spec=args.prior,
                           k_max=args.kmax, tol=args.tol,
                           seed=child_seed(args.seed, "estimator"))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("task", "label", "margin"))
        names = dataset.task_names or tuple(str(i) for i in range(dataset.graph.n_tasks))
        for i in range(dataset.graph.n_tasks):
            writer.writerow((names[i], f"{report.labels[i]:+d}", repr(float(report.margins[i]))))
    finally:
        if args.out:
            out.close()
    if dataset.truth_labels is not None:
        print(f"error_rate {error_rate(report, dataset.truth_labels)!r}", file=sys.stderr)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = load_experiment_config(args.config)
    if args.threads is not None:
        from dataclasses import replace

        config = replace(config, threads=args.threads)
    rows = run_experiment(config)
    destination = args.out or config.out
    if destination:
        write_metrics_csv(rows, destination)
        print(f"wrote {len(rows)} rows to {destination}", file=sys.stderr)
    else:
        write_metrics_csv(rows, sys.stdout)
    return 0


def _cmd_bounds(args: argparse.Namespace) -> int:
    mv_bound, kos_bound = theoretical_bounds(args.l, args.r, args.mu, args.q)
    print(f"mv_bound {mv_bound!r}")
    if kos_bound is None:
        print("kos_bound undefined (below the spectral barrier)")
    else:
        print(f"kos_bound {kos_bound!r}")
    if args.n is not None:
        print(f"tree_prob_bound {tree_probability_bound(args.n, args.l, args.r, args.k)!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdbp",
        description="Binary label inference from noisy crowdsourced answers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a simulated dataset CSV")
    p_sim.add_argument("--n", type=int, required=True, help="number of tasks")
    p_sim.add_argument("--l", type=int, required=True, help="answers per task")
    p_sim.add_argument("--r", type=int, required=True, help="answers per worker")
    p_sim.add_argument("--prior", required=True,
                       help="sh | ash | beta:A,B | atoms:p1=w1,p2=w2,...")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=_cmd_simulate)

    p_inf = sub.add_parser("infer", help="estimate labels for a dataset")
    p_inf.add_argument("--data", required=True)
    p_inf.add_argument("--estimator", required=True,
                       help="mv | kos | bp | ebp1 | ebp2 | oracle-work | oracle-task | em")
    p_inf.add_argument("--prior", default=None)
    p_inf.add_argument("--kmax", type=int, default=100)
    p_inf.add_argument("--tol", type=float, default=1e-5)
    p_inf.add_argument("--seed", type=int, default=0)
    p_inf.add_argument("--subsample-l", type=int, default=None,
                       help="keep at most this many answers per task first")
    p_inf.add_argument("--out", default=None)
    p_inf.set_defaults(func=_cmd_infer)

    p_bench = sub.add_parser("bench", help="run a configured sweep to CSV")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--threads", type=int, default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=_cmd_bench)

    p_bounds = sub.add_parser("bounds", help="print analytic error bounds")
    p_bounds.add_argument("--l", type=int, required=True)
    p_bounds.add_argument("--r", type=int, required=True)
    p_bounds.add_argument("--mu", type=float, required=True)
    p_bounds.add_argument("--q", type=float, required=True)
    p_bounds.add_argument("--n", type=int, default=None)
    p_bounds.add_argument("--k", type=int, default=1)
    p_bounds.set_defaults(func=_cmd_bounds)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericDegeneracyError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
