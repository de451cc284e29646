"""Command-line interface: solve, bench, qubo-export, serve.

Exit codes: 0 success, 1 file or data errors, 2 usage errors.  Config
precedence is CLI flag > config file (``key=value`` lines) > built-in
default.  The remote backend token is read from ``QTABU_REMOTE_TOKEN``.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .anneal import AnnealSchedule
from .backends import ExactBackend, RemoteBackend, SimulatedAnnealingBackend
from .engine import QtaConfig, run_qta
from .errors import ClusterTooLarge, QtabuError
from .model import AtspInstance, make_tour
from .qbsolv_like import solve_qbsolv_like
from .qubo import InfeasibilityReport, build_atsp_qubo, decode, encode_tour, qubo_to_text
from .report import RunReport, aggregate_reports
from .server import LoopbackAnnealerServer
from .tsplib import load_instance

FULL_EXPORT_VAR_CAP = 2500
TOKEN_ENV = "QTABU_REMOTE_TOKEN"

_CONFIG_KEYS = {
    "backend": str,
    "budget": int,
    "max_cluster_size": int,
    "seed": int,
    "init": str,
    "num_reads": int,
    "sweeps": int,
    "reps": int,
    "base_seed": int,
    "methods": str,
    "remote_endpoint": str,
    "subqubo_size": int,
    "qbsolv_outer": int,
    "max_iterations": int,
    "vns_budget": int,
}

_DEFAULTS = {
    "backend": "sa",
    "budget": 40,
    "max_cluster_size": 10,
    "seed": 0,
    "init": "multiform",
    "num_reads": 100,
    "sweeps": 1000,
    "reps": 20,
    "base_seed": 0,
    "methods": "qta,qbsolv",
    "remote_endpoint": None,
    "subqubo_size": 100,
    "qbsolv_outer": 50,
    "max_iterations": 400,
    "vns_budget": 200,
}


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise QtabuError(f"cannot read config {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise QtabuError(f"bad config line {line!r} (expected key=value)")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise QtabuError(f"unknown config key {key!r}")
        out[key] = _CONFIG_KEYS[key](value.strip())
    return out


def _resolve(args: argparse.Namespace, config: dict, key: str):
    cli_value = getattr(args, key, None)
    if cli_value is not None:
        return cli_value
    if key in config:
        return config[key]
    return _DEFAULTS[key]


def _make_backend(name: str, instance: AtspInstance, sweeps: int,
                  remote_endpoint: str | None):
    if name == "exact":
        return ExactBackend(instance)
    if name == "sa":
        return SimulatedAnnealingBackend(AnnealSchedule(sweeps=sweeps))
    if name == "remote":
        if not remote_endpoint:
            raise QtabuError("remote backend needs --remote-endpoint")
        return RemoteBackend(remote_endpoint, auth_token=os.environ.get(TOKEN_ENV))
    raise QtabuError(f"unknown backend {name!r}")


def _load(path: str) -> AtspInstance:
    p = Path(path)
    if not p.exists():
        raise QtabuError(f"instance file not found: {path}")
    return load_instance(p)


# --- solve -------------------------------------------------------------------

def _cmd_solve(args: argparse.Namespace) -> int:
    config = _read_config(args.config)
    instance = _load(args.instance)
    backend_name = _resolve(args, config, "backend")
    backend = _make_backend(
        backend_name, instance, _resolve(args, config, "sweeps"),
        _resolve(args, config, "remote_endpoint"),
    )
    qta = QtaConfig(
        backend=backend,
        max_cluster_size=_resolve(args, config, "max_cluster_size"),
        budget=_resolve(args, config, "budget"),
        seed=_resolve(args, config, "seed"),
        init=_resolve(args, config, "init"),
        num_reads=_resolve(args, config, "num_reads"),
        max_iterations=_resolve(args, config, "max_iterations"),
        wall_clock_limit=args.wall_clock_limit,
        vns_budget=_resolve(args, config, "vns_budget"),
    )
    report = run_qta(instance, qta)
    payload = report.to_json(include_timing=not args.no_timing)
    sys.stdout.write(payload)
    print(report.summary_line(), file=sys.stderr)
    if args.out:
        Path(args.out).write_text(payload)
    return 0


# --- bench -------------------------------------------------------------------

def _bench_one(task: tuple) -> RunReport:
    (path, method, seed, backend_name, sweeps, remote_endpoint,
     max_cluster_size, budget, init, num_reads, max_iterations,
     vns_budget, subqubo_size, qbsolv_outer) = task
    instance = _load(path)
    if method == "qta":
        backend = _make_backend(backend_name, instance, sweeps, remote_endpoint)
        return run_qta(instance, QtaConfig(
            backend=backend,
            max_cluster_size=max_cluster_size,
            budget=budget,
            seed=seed,
            init=init,
            num_reads=num_reads,
            max_iterations=max_iterations,
            vns_budget=vns_budget,
        ))
    if method == "qbsolv":
        return run_qbsolv_baseline(
            instance, seed=seed, subqubo_size=subqubo_size,
            max_outer_iterations=qbsolv_outer, num_reads=num_reads,
            sweeps=sweeps,
        )
    raise QtabuError(f"unknown method {method!r}")


def run_qbsolv_baseline(
    instance: AtspInstance,
    seed: int,
    subqubo_size: int = 100,
    max_outer_iterations: int = 50,
    num_reads: int = 20,
    sweeps: int = 300,
) -> RunReport:
    """Full-instance QUBO solved by the decomposing baseline, as a RunReport."""
    import time

    t0 = time.perf_counter()
    qubo = build_atsp_qubo(instance, range(instance.n))
    rng = np.random.default_rng(seed)
    start_tour = tuple(int(v) for v in rng.permutation(instance.n))
    initial = encode_tour(qubo, start_tour)
    result = solve_qbsolv_like(
        qubo,
        subqubo_size=min(subqubo_size, qubo.n_vars),
        max_outer_iterations=max_outer_iterations,
        seed=seed,
        backend=SimulatedAnnealingBackend(AnnealSchedule(sweeps=sweeps)),
        num_reads=num_reads,
        initial=initial,
    )
    decoded = decode(qubo, result.assignment)
    if isinstance(decoded, InfeasibilityReport):
        # cannot happen from a feasible start under monotone acceptance
        raise QtabuError("baseline returned an infeasible assignment")
    tour = make_tour(instance, decoded.nodes)
    return RunReport(
        instance_name=instance.name,
        method="QBSOLV_LIKE",
        backend="sa",
        best_cost=tour.cost,
        best_tour=tour.nodes,
        backend_calls=result.backend_calls,
        cache_hits=0,
        elapsed=time.perf_counter() - t0,
        seed=seed,
    )


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _read_config(args.config)
    paths: list[str] = []
    for item in args.instances:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(str(f) for f in p.glob("*.atsp")))
            paths.extend(sorted(str(f) for f in p.glob("*.tsp")))
        else:
            paths.append(item)
    if not paths:
        raise QtabuError("no instance files given")
    for path in paths:
        if not Path(path).exists():
            raise QtabuError(f"instance file not found: {path}")

    methods = [m.strip() for m in _resolve(args, config, "methods").split(",") if m.strip()]
    for m in methods:
        if m not in ("qta", "qbsolv"):
            raise QtabuError(f"unknown method {m!r} (expected qta and/or qbsolv)")
    reps = _resolve(args, config, "reps")
    base_seed = _resolve(args, config, "base_seed")

    tasks = [
        (
            path, method, base_seed + k,
            _resolve(args, config, "backend"),
            _resolve(args, config, "sweeps"),
            _resolve(args, config, "remote_endpoint"),
            _resolve(args, config, "max_cluster_size"),
            _resolve(args, config, "budget"),
            _resolve(args, config, "init"),
            _resolve(args, config, "num_reads"),
            _resolve(args, config, "max_iterations"),
            _resolve(args, config, "vns_budget"),
            _resolve(args, config, "subqubo_size"),
            _resolve(args, config, "qbsolv_outer"),
        )
        for path in paths
        for method in methods
        for k in range(reps)
    ]
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_bench_one, tasks))
    else:
        reports = [_bench_one(t) for t in tasks]

    summary = aggregate_reports(reports, reps=reps, base_seed=base_seed)
    print(summary.table())
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.csv").write_text(summary.to_csv())
        Path(f"{prefix}.json").write_text(
            summary.to_json(include_timing=not args.no_timing)
        )
        print(f"wrote {prefix}.csv and {prefix}.json", file=sys.stderr)
    return 0


# --- qubo-export ----------------------------------------------------------------

def _cmd_qubo_export(args: argparse.Namespace) -> int:
    instance = _load(args.instance)
    if args.full:
        n_vars = instance.n * instance.n
        if n_vars > FULL_EXPORT_VAR_CAP:
            raise ClusterTooLarge(
                f"--full would need {n_vars} variables (cap {FULL_EXPORT_VAR_CAP})"
            )
        nodes = list(range(instance.n))
    elif args.nodes:
        nodes = sorted({int(tok) for tok in args.nodes.split(",")})
    else:
        raise QtabuError("need --nodes or --full")
    qubo = build_atsp_qubo(instance, nodes, penalty_a=args.penalty)
    text = qubo_to_text(qubo)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} ({len(qubo.coefficients)} entries)", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


# --- serve ----------------------------------------------------------------------

def _cmd_serve(args: argparse.Namespace) -> int:
    schedule = AnnealSchedule(sweeps=args.sweeps) if args.sweeps else None
    server = LoopbackAnnealerServer(
        host=args.host, port=args.port, token=args.token,
        schedule=schedule, verbose=True,
    )
    print(f"loopback annealer listening on {server.endpoint}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtabu",
        description="Decomposition-based ATSP solver with cached cluster "
                    "solutions and pluggable QUBO backends.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--backend", choices=("exact", "sa", "remote"))
        p.add_argument("--max-cluster-size", type=int, dest="max_cluster_size")
        p.add_argument("--budget", type=int)
        p.add_argument("--init", choices=("multiform", "random"))
        p.add_argument("--num-reads", type=int, dest="num_reads")
        p.add_argument("--sweeps", type=int)
        p.add_argument("--remote-endpoint", dest="remote_endpoint")
        p.add_argument("--max-iterations", type=int, dest="max_iterations")
        p.add_argument("--vns-budget", type=int, dest="vns_budget")
        p.add_argument("--no-timing", action="store_true",
                       help="omit wall-clock fields for byte-identical output")

    p_solve = sub.add_parser("solve", help="run the decomposition solver once")
    p_solve.add_argument("instance")
    common(p_solve)
    p_solve.add_argument("--seed", type=int)
    p_solve.add_argument("--out", help="also write the JSON report here")
    p_solve.add_argument("--wall-clock-limit", type=float, dest="wall_clock_limit")
    p_solve.set_defaults(func=_cmd_solve)

    p_bench = sub.add_parser("bench", help="seeded repetitions over instances")
    p_bench.add_argument("instances", nargs="+",
                         help="instance files or directories")
    common(p_bench)
    p_bench.add_argument("--reps", type=int)
    p_bench.add_argument("--methods", help="comma list from {qta,qbsolv}")
    p_bench.add_argument("--base-seed", type=int, dest="base_seed")
    p_bench.add_argument("--subqubo-size", type=int, dest="subqubo_size")
    p_bench.add_argument("--qbsolv-outer", type=int, dest="qbsolv_outer")
    p_bench.add_argument("--jobs", type=int, default=1,
                         help="parallel worker processes")
    p_bench.add_argument("--out-prefix", dest="out_prefix",
                         help="write <prefix>.csv and <prefix>.json")
    p_bench.set_defaults(func=_cmd_bench)

    p_export = sub.add_parser("qubo-export", help="write the sparse QUBO text form")
    p_export.add_argument("instance")
    p_export.add_argument("--nodes", help="comma-separated node ids")
    p_export.add_argument("--full", action="store_true",
                          help="encode the whole instance")
    p_export.add_argument("--penalty", type=float,
                          help="override the constraint penalty weight")
    p_export.add_argument("--out")
    p_export.set_defaults(func=_cmd_qubo_export)

    p_serve = sub.add_parser("serve", help="run the loopback annealer server")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8137)
    p_serve.add_argument("--token")
    p_serve.add_argument("--sweeps", type=int)
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QtabuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
