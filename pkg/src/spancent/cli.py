"""Command-line front end: compute, eval, spectral, generate, bench."""
from __future__ import annotations

import argparse
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import monte_carlo_scores, spanning_tree_scores
from .graph import (
    EdgeListError,
    Graph,
    GraphStructureError,
    generate_ergodic_erdos_renyi,
    generate_erdos_renyi,
    load_edge_list,
    save_edge_list,
)
from .hybrid import hybrid_scores
from .scores import EdgeScores, compare_score_tables, read_score_table
from .spectral import (
    EigensolverError,
    SpectralBasis,
    compute_spectral_basis,
    exact_scores_power,
    exact_scores_pseudoinverse,
    read_spectral_cache,
    write_spectral_cache,
)
from .traversal import truncated_traversal_scores

ALGOS = ("tgt", "tgtplus", "montecarlo", "stedge", "exact-lpinv", "exact-power")
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    """One resolved computation request (defaults follow the evaluation protocol)."""

    algo: str
    graph: str
    out: str | None = None
    spectral: str | None = None
    epsilon: float = 0.01
    delta: float | None = None  # 1/n once the graph is known
    gamma: int = 10
    omega: int | None = None  # min(128, n) once the graph is known
    seed: int = 0
    threads: int = 1
    tail_tol: float = 1e-12
    tau_max: int = 1000

    def resolve(self, g: Graph) -> None:
        if self.delta is None:
            self.delta = 1.0 / g.n
        if self.omega is None:
            self.omega = min(128, g.n)
        if self.omega > g.n:
            warnings.warn(f"omega={self.omega} clamped to n={g.n}")
            self.omega = g.n
        if self.omega < 2:
            warnings.warn("omega raised to the minimum of 2")
            self.omega = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are 1 here
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _needs_basis(algo: str) -> bool:
    return algo in ("tgt", "tgtplus", "montecarlo")


def _obtain_basis(cfg: RunConfig, g: Graph) -> SpectralBasis:
    path = cfg.spectral
    if path and Path(path).exists():
        basis = read_spectral_cache(path)
        if basis.vectors.shape[1] != g.n or int(round(basis.two_m / 2)) != g.m:
            raise EdgeListError(f"spectral cache {path} does not match the graph")
        if basis.omega < cfg.omega:
            warnings.warn(
                f"cache holds {basis.omega} eigenpairs, fewer than omega={cfg.omega}"
            )
        return basis
    basis = compute_spectral_basis(g, cfg.omega)
    if path:
        write_spectral_cache(basis, path)
    return basis


def _run_algo(cfg: RunConfig, g: Graph, basis: SpectralBasis | None) -> EdgeScores:
    if cfg.algo == "tgt":
        return truncated_traversal_scores(g, basis, cfg.epsilon, threads=cfg.threads)
    if cfg.algo == "tgtplus":
        return hybrid_scores(
            g, basis, cfg.epsilon, cfg.delta, cfg.gamma, cfg.seed, threads=cfg.threads
        )
    if cfg.algo == "montecarlo":
        return monte_carlo_scores(g, basis, cfg.epsilon, cfg.delta, cfg.seed)
    if cfg.algo == "stedge":
        return spanning_tree_scores(
            g, cfg.epsilon, cfg.delta, cfg.seed, threads=cfg.threads
        )
    if cfg.algo == "exact-lpinv":
        return exact_scores_pseudoinverse(g)
    if cfg.algo == "exact-power":
        return exact_scores_power(g, tail_tol=cfg.tail_tol, tau_max=cfg.tau_max)
    raise ValueError(f"unknown algo {cfg.algo!r}")


def cmd_compute(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        algo=args.algo,
        graph=args.graph,
        out=args.out,
        spectral=args.spectral,
        epsilon=args.epsilon,
        delta=args.delta,
        gamma=args.gamma,
        omega=args.omega,
        seed=args.seed,
        threads=args.threads,
        tail_tol=args.tail_tol,
        tau_max=args.tau_max,
    )
    g = load_edge_list(cfg.graph)
    cfg.resolve(g)
    basis = _obtain_basis(cfg, g) if _needs_basis(cfg.algo) else None
    started = time.perf_counter()
    scores = _run_algo(cfg, g, basis)
    elapsed = time.perf_counter() - started
    scores.write(cfg.out)
    print(f"algo={cfg.algo} n={g.n} m={g.m} seconds={elapsed:.6f}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    report = compare_score_tables(
        read_score_table(args.result_a), read_score_table(args.result_b)
    )
    print(
        f"mean_abs_error={report.mean_abs_error:.12g} "
        f"max_abs_error={report.max_abs_error:.12g} edges={report.edges}"
    )
    return EXIT_OK


def cmd_spectral(args: argparse.Namespace) -> int:
    g = load_edge_list(args.graph)
    omega = min(128, g.n) if args.omega is None else args.omega
    if omega > g.n:
        warnings.warn(f"omega={omega} clamped to n={g.n}")
        omega = g.n
    if omega < 2:
        warnings.warn("omega raised to the minimum of 2")
        omega = 2
    started = time.perf_counter()
    basis = compute_spectral_basis(g, omega)
    elapsed = time.perf_counter() - started
    write_spectral_cache(basis, args.out)
    print(f"n={g.n} m={g.m} omega={omega} seconds={elapsed:.6f}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    if args.allow_nonergodic:
        g = generate_erdos_renyi(args.n, args.m, args.seed)
        used = args.seed
    else:
        g, used = generate_ergodic_erdos_renyi(
            args.n, args.m, args.seed, max_retries=args.max_retries
        )
    save_edge_list(g, args.out)
    print(f"n={g.n} m={g.m} seed={used}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    exacts = args.exact or []
    header = [
        "graph", "algo", "epsilon", "omega", "gamma", "seed",
        "seconds", "mean_abs_error", "status",
    ]
    print("\t".join(header))
    for gi, graph_path in enumerate(args.graph):
        g = load_edge_list(graph_path)
        exact_table = None
        if gi < len(exacts):
            exact_table = read_score_table(exacts[gi])
        basis_cache: dict[int, SpectralBasis] = {}
        for algo in args.algo:
            for eps in args.epsilon:
                for omega in args.omega:
                    for gamma in args.gamma:
                        for seed in args.seed:
                            row = _bench_cell(
                                g, graph_path, algo, eps, omega, gamma, seed,
                                args.delta, args.threads, basis_cache, exact_table,
                            )
                            print("\t".join(row))
    return EXIT_OK


def _bench_cell(
    g, graph_path, algo, eps, omega, gamma, seed, delta, threads, basis_cache, exact_table
) -> list[str]:
    cfg = RunConfig(
        algo=algo, graph=graph_path, epsilon=eps, delta=delta,
        gamma=gamma, omega=omega, seed=seed, threads=threads,
    )
    cfg.resolve(g)
    row = [graph_path, algo, f"{eps:g}", f"{cfg.omega}", f"{gamma}", f"{seed}"]
    try:
        basis = None
        if _needs_basis(algo):
            if cfg.omega not in basis_cache:
                basis_cache[cfg.omega] = compute_spectral_basis(g, cfg.omega)
            basis = basis_cache[cfg.omega]
        started = time.perf_counter()
        scores = _run_algo(cfg, g, basis)
        elapsed = time.perf_counter() - started
        err = ""
        if exact_table is not None:
            lu, lv = g.labels[g.edge_u], g.labels[g.edge_v]
            mine = (lu, lv, scores.values)
            err = f"{compare_score_tables(mine, exact_table).mean_abs_error:.6g}"
        row += [f"{elapsed:.6f}", err, "ok"]
    except Exception as exc:  # keep sweeping; record the failure in the row
        row += ["", "", f"error:{type(exc).__name__}:{exc}"]
    return row


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spancent", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("compute", help="compute all-edge scores")
    pc.add_argument("--algo", required=True, choices=ALGOS)
    pc.add_argument("--graph", required=True)
    pc.add_argument("--out", required=True)
    pc.add_argument("--spectral", help="eigenpair cache path (read, or written if absent)")
    pc.add_argument("--epsilon", type=float, default=0.01)
    pc.add_argument("--delta", type=float, default=None, help="default 1/n")
    pc.add_argument("--gamma", type=int, default=10)
    pc.add_argument("--omega", type=int, default=None, help="default min(128, n)")
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--threads", type=int, default=1)
    pc.add_argument("--tail-tol", type=float, default=1e-12)
    pc.add_argument("--tau-max", type=int, default=1000)
    pc.set_defaults(func=cmd_compute)

    pe = sub.add_parser("eval", help="compare two score files")
    pe.add_argument("result_a")
    pe.add_argument("result_b")
    pe.set_defaults(func=cmd_eval)

    ps = sub.add_parser("spectral", help="precompute the eigenpair cache")
    ps.add_argument("--graph", required=True)
    ps.add_argument("--omega", type=int, default=None)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_spectral)

    pg = sub.add_parser("generate", help="write a random graph edge list")
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--m", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out", required=True)
    pg.add_argument("--allow-nonergodic", action="store_true")
    pg.add_argument("--max-retries", type=int, default=64)
    pg.set_defaults(func=cmd_generate)

    pb = sub.add_parser("bench", help="sweep graphs x algos x parameters, TSV to stdout")
    pb.add_argument("--graph", action="append", required=True)
    pb.add_argument("--algo", action="append", required=True, choices=ALGOS)
    pb.add_argument("--epsilon", action="append", type=float, default=None)
    pb.add_argument("--omega", action="append", type=int, default=None)
    pb.add_argument("--gamma", action="append", type=int, default=None)
    pb.add_argument("--seed", action="append", type=int, default=None)
    pb.add_argument("--delta", type=float, default=None)
    pb.add_argument("--threads", type=int, default=1)
    pb.add_argument("--exact", action="append", help="exact score file per graph, in order")
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench":
        args.epsilon = args.epsilon or [0.01]
        args.omega = args.omega or [None]
        args.gamma = args.gamma or [10]
        args.seed = args.seed or [0]
    try:
        return args.func(args)
    except (EdgeListError, GraphStructureError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EigensolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
