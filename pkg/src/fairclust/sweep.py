"""Lambda/k sweeps, aggregation and trade-off chart data."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from fairclust.graph import ClusterLabels, Graph, GroupAssignment
from fairclust.metrics import compute_report
from fairclust.solver import NumericalError, SolverConfig, fit

SWEEP_FIELDS = (
    "k", "lambda", "seed", "Q", "B", "accuracy", "rho",
    "final_loss", "iterations", "wall_time_ms", "status",
)
VALUE_FIELDS = ("Q", "B", "accuracy", "rho", "final_loss", "iterations", "wall_time_ms")


def lambda_grid(count: int = 50, lam_max: float = 100.0, median: float = 3.0) -> list[float]:
    """Zero plus ``count - 1`` geometrically spaced values ending at ``lam_max``.

    The geometric start is solved for so that the median of the whole grid
    equals ``median``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if lam_max <= 0:
        raise ValueError("lam_max must be positive")
    if count == 1:
        return [0.0]
    if count == 2:
        return [0.0, float(lam_max)]
    if not 0 < median < lam_max:
        raise ValueError("median must lie strictly between 0 and lam_max")

    def grid(log_lo):
        return np.concatenate([[0.0], np.geomspace(math.exp(log_lo), lam_max, count - 1)])

    lo = brentq(lambda t: np.median(grid(t)) - median, math.log(lam_max) - 200, math.log(lam_max))
    values = grid(lo)
    values[-1] = lam_max
    return [float(v) for v in values]


def cell_seed(base_seed: int, k: int, repeat: int) -> int:
    """Seed for one run, derived from (base_seed, k, repeat).

    Lambda is deliberately not mixed in: every lambda of a repeat starts from
    the same initial factors, so curves over lambda compare like with like.
    """
    state = np.random.SeedSequence(base_seed, spawn_key=(k, repeat)).generate_state(1)
    return int(state[0])


@dataclass
class SweepSpec:
    lambda_grid: list[float]
    k_grid: list[int]
    repeats: int = 10
    base_seed: int = 0

    def __post_init__(self):
        if not self.lambda_grid or not self.k_grid:
            raise ValueError("lambda and k grids must be nonempty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if any(lam < 0 for lam in self.lambda_grid):
            raise ValueError("lambda values must be >= 0")
        if any(k < 2 for k in self.k_grid):
            raise ValueError("k values must be >= 2")


@dataclass
class SweepTable:
    rows: list[dict]
    aggregates: list[dict] = field(default_factory=list)

    def cells(self):
        keys = sorted({(r["k"], r["lambda"]) for r in self.rows})
        for k, lam in keys:
            yield k, lam, [r for r in self.rows if r["k"] == k and r["lambda"] == lam]

    def aggregate(self) -> None:
        self.aggregates = []
        for k, lam, runs in self.cells():
            ok = [r for r in runs if r["status"] == "ok"]
            mean = {"k": k, "lambda": lam, "seed": None, "status": "mean"}
            std = {"k": k, "lambda": lam, "seed": None, "status": "std"}
            for name in VALUE_FIELDS:
                vals = [r[name] for r in ok if r[name] is not None]
                mean[name] = float(np.mean(vals)) if vals else None
                std[name] = float(np.std(vals)) if vals else None
            self.aggregates.extend([mean, std])

    def means(self, k: int) -> list[dict]:
        return [a for a in self.aggregates if a["k"] == k and a["status"] == "mean"]

    def twin_chart(self, k: int) -> list[tuple[float, float | None, float | None]]:
        return [(a["lambda"], a["Q"], a["B"]) for a in self.means(k)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows + self.aggregates:
            writer.writerow({f: _fmt(row.get(f)) for f in SWEEP_FIELDS})
        return buf.getvalue()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def select_lambda(chart) -> float | None:
    """Grid lambda minimizing |Q - B|; earliest grid point wins ties."""
    best, best_gap = None, math.inf
    for lam, q, b in chart:
        if q is None or b is None:
            continue
        gap = abs(q - b)
        if gap < best_gap:
            best, best_gap = lam, gap
    return best


def twin_chart_csv(chart) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["lambda", "Q", "B"])
    for lam, q, b in chart:
        writer.writerow([_fmt(lam), _fmt(q), _fmt(b)])
    return buf.getvalue()


def run_cell(graph: Graph, groups: GroupAssignment, truth: ClusterLabels | None,
             k: int, lam: float, seed: int, solver_opts: dict | None = None,
             record_time: bool = True) -> dict:
    row = {"k": k, "lambda": lam, "seed": seed}
    row.update(dict.fromkeys(VALUE_FIELDS))
    try:
        result = fit(graph, groups, SolverConfig(k=k, lam=lam, seed=seed, **(solver_opts or {})))
        report = compute_report(graph, result.labels, groups, truth)
    except NumericalError as exc:
        row["status"] = f"numerical_error: {exc}"
        return row
    except ValueError as exc:
        row["status"] = f"error: {exc}"
        return row
    row.update(
        Q=report.modularity,
        B=report.avg_balance,
        accuracy=report.accuracy,
        rho=report.rho_avg,
        final_loss=result.final_loss,
        iterations=result.iterations,
        wall_time_ms=result.manifest["wall_time_ms"] if record_time else 0.0,
        status="ok",
    )
    return row


_shared: dict = {}


def _init_worker(graph, groups, truth, solver_opts, record_time):
    _shared.update(graph=graph, groups=groups, truth=truth,
                   solver_opts=solver_opts, record_time=record_time)


def _run_task(task):
    k, lam, seed = task
    return run_cell(_shared["graph"], _shared["groups"], _shared["truth"], k, lam, seed,
                    _shared["solver_opts"], _shared["record_time"])


def worker_limit(requested: int | None = None) -> int:
    """Requested worker count, capped by FAIRCLUST_THREADS when set."""
    limit = requested or os.cpu_count() or 1
    env = os.environ.get("FAIRCLUST_THREADS")
    if env:
        limit = min(limit, max(1, int(env)))
    return max(1, limit)


def run_sweep(graph: Graph, groups: GroupAssignment, spec: SweepSpec,
              truth: ClusterLabels | None = None, solver_opts: dict | None = None,
              workers: int = 1, record_time: bool = True) -> SweepTable:
    tasks = [
        (k, float(lam), cell_seed(spec.base_seed, k, rep))
        for k in spec.k_grid
        for lam in spec.lambda_grid
        for rep in range(spec.repeats)
    ]
    order = {task: i for i, task in enumerate(tasks)}
    if workers <= 1:
        _init_worker(graph, groups, truth, solver_opts, record_time)
        rows = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(graph, groups, truth, solver_opts, record_time)) as pool:
            rows = list(pool.map(_run_task, tasks))
    # stable (k, lambda, repeat) order regardless of completion order
    rows.sort(key=lambda r: order[(r["k"], r["lambda"], r["seed"])])
    table = SweepTable(rows)
    table.aggregate()
    return table


def svg_chart(chart, title: str = "", width: int = 640, height: int = 360) -> str:
    """Line chart of Q (solid) and B (dashed) against grid position."""
    pad = 48
    pts = [(lam, q, b) for lam, q, b in chart]
    xs = range(len(pts))

    def x_at(i):
        return pad + (width - 2 * pad) * (i / max(len(pts) - 1, 1))

    def y_at(v):
        return height - pad - (height - 2 * pad) * v

    def path(idx):
        coords = [f"{x_at(i):.1f},{y_at(p[idx]):.1f}" for i, p in zip(xs, pts) if p[idx] is not None]
        return " ".join(coords)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for v in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{y_at(v) + 4:.1f}" text-anchor="end" font-size="10">{v:g}</text>')
    for i, p in zip(xs, pts):
        parts.append(f'<text x="{x_at(i):.1f}" y="{height - pad + 14}" text-anchor="middle" '
                     f'font-size="9">{p[0]:.3g}</text>')
    parts.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" points="{path(1)}"/>')
    parts.append(f'<polyline fill="none" stroke="#d62728" stroke-width="2" '
                 f'stroke-dasharray="6,4" points="{path(2)}"/>')
    parts.append(f'<text x="{width - pad}" y="{pad - 20}" text-anchor="end" font-size="11" '
                 f'fill="#1f77b4">Q (solid)</text>')
    parts.append(f'<text x="{width - pad}" y="{pad - 6}" text-anchor="end" font-size="11" '
                 f'fill="#d62728">B (dashed)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
