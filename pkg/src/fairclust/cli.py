"""Command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 numerical abort,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from fairclust import __version__
from fairclust.contrastive import build_contrastive
from fairclust.graph import (
    GraphFormatError,
    load_edge_list,
    load_groups,
    read_edge_pairs,
    read_membership,
    save_edge_list,
    save_groups,
    validate,
    write_labels_csv,
    write_membership,
)
from fairclust.metrics import compute_report
from fairclust.sbm import SbmSpec, generate
from fairclust.solver import NumericalError, SolverConfig, fit
from fairclust.sweep import (
    SweepSpec,
    lambda_grid,
    run_sweep,
    select_lambda,
    svg_chart,
    twin_chart_csv,
    worker_limit,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _open_text(path, mode="r"):
    return open(path, mode, encoding="utf-8", newline="" if "w" in mode else None)


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with _open_text(path, "w") as fh:
        fh.write(text)
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _matrix_csv(M) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in np.asarray(M))


def _parse_list(text, cast):
    if isinstance(text, (list, tuple)):
        return [cast(x) for x in text]
    return [cast(x) for x in str(text).replace(" ", "").split(",") if x]


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _load_inputs(args):
    _require(args, "edges", "groups")
    with _open_text(args.edges) as fh:
        graph = load_edge_list(fh, getattr(args, "n", None))
    with _open_text(args.groups) as fh:
        groups = load_groups(fh, graph.n)
    truth = None
    if getattr(args, "truth", None):
        with _open_text(args.truth) as fh:
            truth = read_membership(fh)
        if truth.n != graph.n:
            raise GraphFormatError(f"truth has {truth.n} nodes, graph has {graph.n}")
    return graph, groups, truth


def _solver_opts(args) -> dict:
    return {
        "max_iters": args.max_iters,
        "tol": args.tol,
        "eps": args.eps,
        "exponent": args.exponent,
        "regularize": not args.no_reg,
        "include_diagonal": args.include_diagonal,
    }


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    _require(args, "n", "k")
    spec = SbmSpec(n=args.n, k=args.k, g=args.g, p_in=args.p_in, p_out=args.p_out,
                   seed=args.seed, aligned_groups=args.aligned_groups)
    graph, truth, groups = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    edges, group_file, truth_file = (
        out / f"{args.prefix}{ext}" for ext in (".edges", ".groups", ".truth.csv")
    )
    with _open_text(edges, "w") as fh:
        save_edge_list(graph, fh)
    with _open_text(group_file, "w") as fh:
        save_groups(groups, fh)
    with _open_text(truth_file, "w") as fh:
        write_labels_csv(truth.labels, fh)
    sidecar = _write(out / f"{args.prefix}.json", _dump_json(spec.to_dict()))
    for p in (edges, group_file, truth_file, sidecar):
        print(p)
    return EXIT_OK


def _manifest(result, deterministic: bool) -> dict:
    manifest = dict(result.manifest)
    if deterministic:
        manifest["wall_time_ms"] = 0.0
        manifest.pop("started_at", None)
        manifest.pop("finished_at", None)
    manifest["deterministic"] = deterministic
    return manifest


def cmd_cluster(args) -> int:
    _require(args, "k")
    graph, groups, truth = _load_inputs(args)
    config = SolverConfig(k=args.k, lam=args.lam, seed=args.seed, **_solver_opts(args))
    result = fit(graph, groups, config)
    report = compute_report(graph, result.labels, groups, truth)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with _open_text(out / "membership.csv", "w") as fh:
        write_membership(result.labels, fh)
    written = [out / "membership.csv"]
    written.append(_write(out / "manifest.json", _dump_json(_manifest(result, args.deterministic))))
    written.append(_write(out / "metrics.json", report.to_json()))
    if args.dump_factors:
        written.append(_write(out / "H.csv", _matrix_csv(result.factors.H)))
        written.append(_write(out / "W.csv", _matrix_csv(result.factors.W)))
    if args.dump_contrastive:
        system = build_contrastive(groups, args.include_diagonal)
        written.append(_write(out / "C.csv", _matrix_csv(system.C)))
        written.append(_write(out / "L.csv", _matrix_csv(system.L)))
    for p in written:
        print(p)
    return EXIT_OK


def cmd_metrics(args) -> int:
    _require(args, "membership")
    graph, groups, truth = _load_inputs(args)
    with _open_text(args.membership) as fh:
        labels = read_membership(fh, args.k)
    if labels.n != graph.n:
        raise GraphFormatError(f"membership has {labels.n} nodes, graph has {graph.n}")
    text = compute_report(graph, labels, groups, truth).to_json()
    if args.out:
        print(_write(Path(args.out), text))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.lambda_grid is not None:
        grid = _parse_list(args.lambda_grid, float)
    else:
        grid = lambda_grid(args.lambda_count, args.lambda_max, args.lambda_median)
    if args.k_grid is not None:
        ks = _parse_list(args.k_grid, int)
    else:
        _require(args, "k")
        ks = [args.k]
    spec = SweepSpec(lambda_grid=grid, k_grid=ks, repeats=args.repeats, base_seed=args.base_seed)
    graph, groups, truth = _load_inputs(args)
    table = run_sweep(graph, groups, spec, truth, _solver_opts(args),
                      workers=worker_limit(args.workers), record_time=not args.deterministic)

    out = Path(args.out)
    written = [_write(out / "sweep.csv", table.to_csv())]
    summary = {"lambda_grid": grid, "k_grid": ks, "repeats": spec.repeats,
               "base_seed": spec.base_seed, "version": __version__, "best_lambda": {}}
    for k in ks:
        chart = table.twin_chart(k)
        written.append(_write(out / f"twin_k{k}.csv", twin_chart_csv(chart)))
        summary["best_lambda"][str(k)] = select_lambda(chart)
        if args.svg:
            written.append(_write(out / f"twin_k{k}.svg", svg_chart(chart, title=f"k = {k}")))
    failed = sum(1 for r in table.rows if r["status"] != "ok")
    summary["failed_runs"] = failed
    written.append(_write(out / "summary.json", _dump_json(summary)))
    for p in written:
        print(p)
    for k in ks:
        print(f"k={k}: lambda* = {summary['best_lambda'][str(k)]}")
    if failed:
        print(f"{failed} run(s) failed; see status column", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.matrix:
        M = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
        report = validate(M)
    else:
        _require(args, "edges")
        with _open_text(args.edges) as fh:
            pairs = read_edge_pairs(fh)
        n = max((max(u, v) for u, v, _ in pairs), default=-1) + 1
        n = max(n, args.n or 0)
        M = np.zeros((n, n))
        for u, v, _ in pairs:
            M[u, v] = M[v, u] = 1.0
        report = validate(M)
    sys.stdout.write(_dump_json(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_USAGE


# -- parser --------------------------------------------------------------------


def _add_solver_flags(p):
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--exponent", type=float, default=0.25,
                   help="root applied to the H update ratio (0.25 exact, 0.5 for ablation)")
    p.add_argument("--no-reg", action="store_true", help="disable the fairness regularizer")
    p.add_argument("--include-diagonal", action="store_true",
                   help="keep self pairs in the same-group indicator")


def _add_input_flags(p, truth=True):
    p.add_argument("--edges", help="edge-list file")
    p.add_argument("--groups", help="group file, one token per node")
    p.add_argument("--n", type=int, help="node count if larger than max id + 1")
    if truth:
        p.add_argument("--truth", help="ground-truth labels CSV (node,cluster)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairclust", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an SBM benchmark graph")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--g", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.25)
    p.add_argument("--p-out", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aligned-groups", action="store_true",
                   help="groups coincide with contiguous id ranges instead of shuffled")
    p.add_argument("--out", default=".")
    p.add_argument("--prefix", default="sbm")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="run one fair NMTF clustering")
    p.add_argument("--config")
    _add_input_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    p.add_argument("--out", default=".")
    p.add_argument("--dump-factors", action="store_true", help="also write H.csv and W.csv")
    p.add_argument("--dump-contrastive", action="store_true",
                   help="also write the dense C.csv and L.csv (n x n)")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded math, no wall-clock fields in outputs")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="lambda/k grid experiment")
    p.add_argument("--config")
    _add_input_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--k-grid", help="comma-separated k values")
    p.add_argument("--lambda-grid", help="comma-separated lambda values")
    p.add_argument("--lambda-count", type=int, default=50)
    p.add_argument("--lambda-max", type=float, default=100.0)
    p.add_argument("--lambda-median", type=float, default=3.0)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _add_solver_flags(p)
    p.add_argument("--out", default=".")
    p.add_argument("--svg", action="store_true", help="write an SVG twin chart per k")
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="score an external membership file")
    p.add_argument("--config")
    _add_input_flags(p)
    p.add_argument("--membership")
    p.add_argument("--k", type=int, help="cluster count (default: max label + 1)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="structural diagnostics for a graph")
    p.add_argument("--config")
    p.add_argument("--edges")
    p.add_argument("--matrix", help="dense adjacency as CSV")
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_validate)
    return parser


def load_config(path: str) -> dict:
    """JSON object, or ``key = value`` lines with '#' comments."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = _coerce(value.strip("\"'"))
    cfg = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        cfg["lam" if key == "lambda" else key] = value
    return cfg


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        # re-parse so explicit flags override config values
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except UsageError as exc:
        print(f"fairclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fairclust: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "deterministic", False):
            with threadpool_limits(limits=1):
                return args.func(args)
        return args.func(args)
    except UsageError as exc:
        print(f"fairclust {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"fairclust {args.command}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, GraphFormatError) as exc:
        print(f"fairclust {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fairclust {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
