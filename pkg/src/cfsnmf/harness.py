"""Restart orchestration, hyperparameter sweeps and multi-model comparisons.

Every restart is an independent job identified by its solver config (which
carries the seed). Jobs run in-process or in a process pool; results are
collected in submission order, so the outcome never depends on the worker
count. Each job pins BLAS to one thread for the same reason.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
from threadpoolctl import threadpool_limits

from . import metrics
from .errors import UndefinedMetricError
from .factorizer import SolverConfig, solve
from .graph import AdjacencyMatrix, GroundTruth, build_laplacian
from .partition import assign

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_LAMBDA_GRID",
    "DEFAULT_MU_GRID",
    "DEFAULT_SWEEP_MU",
    "RestartResult",
    "RunReport",
    "SweepGrid",
    "SweepReport",
    "ComparisonReport",
    "run_restarts",
    "detect",
    "sweep",
    "compare",
    "compare_scores",
    "format_table",
    "format_rank",
]

SCHEMA_VERSION = "1.0"
DEFAULT_LAMBDA_GRID = (0.0, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3)
DEFAULT_MU_GRID = tuple(2.0 ** e for e in (-10, -8, -6, -4, -2, 0, 1))
DEFAULT_SWEEP_MU = 2.0 ** -8


@dataclass
class RestartResult:
    seed: int
    labels: np.ndarray
    objective_trace: np.ndarray
    modularity: float | None
    nmi: float | None
    ari: float | None
    asymmetry: float
    iterations: int
    kkt_residual: float
    converged: bool
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "modularity": self.modularity,
            "nmi": self.nmi,
            "ari": self.ari,
            "asymmetry": self.asymmetry,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
            "wall_time": self.wall_time,
        }


# state shared with pool workers (set once per process by the initializer)
_WORKER: dict = {}


def _init_worker(adj: AdjacencyMatrix, truth: GroundTruth | None) -> None:
    _WORKER["adj"] = adj
    _WORKER["lap"] = build_laplacian(adj)
    _WORKER["truth"] = truth


def _run_job(cfg: SolverConfig) -> RestartResult:
    return _evaluate(_WORKER["adj"], _WORKER["lap"], _WORKER["truth"], cfg)


def _evaluate(adj, lap, truth, cfg: SolverConfig) -> RestartResult:
    with threadpool_limits(limits=1):
        res = solve(adj, lap, cfg)
    f = res.factors
    part = assign(f.X)
    try:
        q = metrics.modularity(adj, part)
    except UndefinedMetricError:
        q = None
    nmi = ari = None
    if truth is not None:
        nmi = metrics.nmi(truth.labels, part)
        ari = metrics.ari(truth.labels, part) if adj.n >= 2 else None
    return RestartResult(
        seed=cfg.seed,
        labels=part.labels,
        objective_trace=res.objective_trace,
        modularity=q,
        nmi=nmi,
        ari=ari,
        asymmetry=metrics.asymmetry(f),
        iterations=res.iterations_run,
        kkt_residual=res.kkt_residual,
        converged=res.converged,
        wall_time=res.wall_time,
    )


def _execute(adj: AdjacencyMatrix, truth, configs: list, workers: int = 1) -> list:
    if workers <= 1 or len(configs) <= 1:
        lap = build_laplacian(adj)
        return [_evaluate(adj, lap, truth, c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(adj, truth)) as pool:
        return list(pool.map(_run_job, configs))


def run_restarts(adj: AdjacencyMatrix, cfg: SolverConfig, restarts: int = 10,
                 truth: GroundTruth | None = None, workers: int = 1) -> list:
    """Solve with seeds ``cfg.seed .. cfg.seed + restarts - 1``."""
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    configs = [cfg.with_seed(cfg.seed + r) for r in range(restarts)]
    return _execute(adj, truth, configs, workers)


def _mean_std(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None}
    return {"mean": statistics.fmean(vals), "std": statistics.pstdev(vals)}


def _best_index(results) -> int:
    """Index of the highest-modularity restart; earliest wins ties."""
    best, best_q = 0, None
    for i, r in enumerate(results):
        if r.modularity is not None and (best_q is None or r.modularity > best_q):
            best, best_q = i, r.modularity
    return best


def _config_echo(model: str, cfg: SolverConfig, restarts: int) -> dict:
    mu, lam = cfg.weights
    return {
        "model": model,
        "K": cfg.K,
        "mu": mu,
        "lambda": lam,
        "tol": cfg.tol,
        "max_iters": cfg.max_iters,
        "seed": cfg.seed,
        "restarts": restarts,
    }


@dataclass
class RunReport:
    model: str
    config: SolverConfig
    restarts: list
    graph: dict = field(default_factory=dict)

    @property
    def best(self) -> RestartResult:
        return self.restarts[_best_index(self.restarts)]

    def aggregate(self) -> dict:
        keys = ("modularity", "nmi", "ari", "asymmetry", "iterations", "kkt_residual", "wall_time")
        return {k: _mean_std([getattr(r, k) for r in self.restarts]) for k in keys}

    def to_dict(self) -> dict:
        best = self.best
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "detect",
            "config": _config_echo(self.model, self.config, len(self.restarts)),
            "graph": self.graph,
            "restarts": [r.to_dict() for r in self.restarts],
            "aggregate": self.aggregate(),
            "best_seed": best.seed,
            "objective_trace": best.objective_trace.tolist(),
        }


def _graph_summary(adj: AdjacencyMatrix) -> dict:
    return {"nodes": adj.n, "edges": adj.n_edges, "self_loops_skipped": adj.self_loops_skipped}


def detect(adj: AdjacencyMatrix, model: str, cfg: SolverConfig, restarts: int = 10,
           truth: GroundTruth | None = None, workers: int = 1) -> RunReport:
    results = run_restarts(adj, cfg, restarts, truth, workers)
    return RunReport(model, cfg, results, _graph_summary(adj))


@dataclass
class SweepGrid:
    """Grids for the two-phase sweep: ``lam`` at fixed ``mu``, then ``mu`` at the best ``lam``."""

    lambda_values: tuple = DEFAULT_LAMBDA_GRID
    mu_values: tuple = DEFAULT_MU_GRID
    mu_fixed: float = DEFAULT_SWEEP_MU

    def __post_init__(self):
        self.lambda_values = tuple(float(v) for v in self.lambda_values)
        self.mu_values = tuple(float(v) for v in self.mu_values)
        if not self.lambda_values or not self.mu_values:
            raise ValueError("sweep grids must be nonempty")
        if min(self.lambda_values) < 0 or min(self.mu_values) < 0 or self.mu_fixed < 0:
            raise ValueError("sweep grid values must be >= 0")


@dataclass
class SweepReport:
    config: SolverConfig
    grid: SweepGrid
    restarts: int
    lambda_rows: list  # (value, mean, std)
    mu_rows: list
    best_lambda: float
    best_mu: float
    graph: dict = field(default_factory=dict)

    @property
    def best_modularity(self):
        for value, mean, _ in self.mu_rows:
            if value == self.best_mu:
                return mean
        return None

    def table(self) -> list:
        """Rows ``(parameter, value, mean_modularity, std_modularity)``: lambda phase first."""
        return ([("lambda", *row) for row in self.lambda_rows]
                + [("mu", *row) for row in self.mu_rows])

    def to_tsv(self) -> str:
        lines = ["parameter\tvalue\tmean_modularity\tstd_modularity"]
        for name, value, mean, std in self.table():
            lines.append(f"{name}\t{value!r}\t{_fmt(mean)}\t{_fmt(std)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        def rows(rs):
            return [{"value": v, "mean_modularity": m, "std_modularity": s} for v, m, s in rs]

        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "config": _config_echo("cfs", self.config, self.restarts),
            "graph": self.graph,
            "lambda_phase": {"mu": self.grid.mu_fixed, "rows": rows(self.lambda_rows),
                             "best_lambda": self.best_lambda},
            "mu_phase": {"lambda": self.best_lambda, "rows": rows(self.mu_rows),
                         "best_mu": self.best_mu},
            "selected": {"lambda": self.best_lambda, "mu": self.best_mu,
                         "mean_modularity": self.best_modularity},
        }


def _fmt(x) -> str:
    return "nan" if x is None else repr(float(x))


def _select(rows) -> float:
    """Grid value with the largest mean modularity; the earliest value wins ties."""
    best_value, best_mean = rows[0][0], None
    for value, mean, _ in rows:
        if mean is not None and (best_mean is None or mean > best_mean):
            best_value, best_mean = value, mean
    return best_value


def _grid_rows(adj, truth, values, make_configs, workers) -> list:
    """Mean/std modularity per grid value; all grid points share one job batch."""
    batches = [make_configs(v) for v in values]
    results = iter(_execute(adj, truth, [c for b in batches for c in b], workers))
    rows = []
    for value, batch in zip(values, batches):
        stats = _mean_std([next(results).modularity for _ in batch])
        rows.append((value, stats["mean"], stats["std"]))
    return rows


def sweep(adj: AdjacencyMatrix, cfg: SolverConfig, grid: SweepGrid | None = None,
          restarts: int = 10, truth: GroundTruth | None = None, workers: int = 1) -> SweepReport:
    """Modularity-driven two-phase sweep of the CFS weights.

    Phase one scans ``lambda_values`` with ``mu = grid.mu_fixed``; phase two
    scans ``mu_values`` at the lambda with the highest mean modularity.
    """
    grid = grid or SweepGrid()
    seeds = [cfg.seed + r for r in range(restarts)]

    def configs(mu, lam):
        return [SolverConfig("cfs", cfg.K, mu, lam, cfg.max_iters, cfg.tol, s, cfg.eps_guard)
                for s in seeds]

    lam_rows = _grid_rows(adj, truth, grid.lambda_values,
                          lambda v: configs(grid.mu_fixed, v), workers)
    best_lam = _select(lam_rows)
    mu_rows = _grid_rows(adj, truth, grid.mu_values, lambda v: configs(v, best_lam), workers)
    best_mu = _select(mu_rows)
    return SweepReport(cfg, grid, restarts, lam_rows, mu_rows, best_lam, best_mu,
                       _graph_summary(adj))


@dataclass
class ComparisonReport:
    nmi: metrics.ScoreTable
    ranks: dict
    ari: metrics.ScoreTable | None = None
    ari_ranks: dict | None = None
    configs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": "compare",
            "datasets": list(self.nmi.datasets),
            "models": list(self.nmi.models),
            "nmi": self.nmi.values.tolist(),
            "friedman_ranks": self.ranks,
            "configs": self.configs,
        }
        if self.ari is not None:
            out["ari"] = self.ari.values.tolist()
            out["ari_friedman_ranks"] = self.ari_ranks
        return out

    def to_text(self) -> str:
        return format_table("NMI%", self.nmi, self.ranks) + (
            "\n" + format_table("ARI%", self.ari, self.ari_ranks) if self.ari is not None else "")


def format_rank(value: float) -> str:
    """Two decimals, halves rounded up (``3.625 -> '3.63'``)."""
    return str(Decimal(value).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def format_table(title, table: metrics.ScoreTable, ranks: dict, percent=True) -> str:
    width = max(8, *(len(m) + 2 for m in table.models))
    lines = [title.ljust(10) + "".join(m.rjust(width) for m in table.models)]
    for name, row in zip(table.datasets, table.values):
        cells = (metrics.format_percent(v) if percent else f"{v:.2f}" for v in row)
        lines.append(name.ljust(10) + "".join(c.rjust(width) for c in cells))
    lines.append("Ranks".ljust(10) + "".join(format_rank(ranks[m]).rjust(width) for m in table.models))
    return "\n".join(lines) + "\n"


def _unique_labels(names) -> list:
    seen: dict = {}
    out = []
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        out.append(name if seen[name] == 1 else f"{name}#{seen[name]}")
    return out


def compare(datasets: list, models: list, restarts: int = 10, workers: int = 1,
            with_ari: bool = True) -> ComparisonReport:
    """Fill dataset x model tables of mean NMI (and ARI) and rank the models.

    ``datasets`` holds ``(name, AdjacencyMatrix, GroundTruth)`` triples and
    ``models`` holds ``(model_name, SolverConfig)`` pairs. A model listed
    twice gets a ``#2`` suffix so both columns survive.
    """
    if not datasets:
        raise ValueError("compare needs at least one dataset")
    if len(models) < 2:
        raise ValueError("compare needs at least two models")
    labels = _unique_labels([m for m, _ in models])
    nmi_rows, ari_rows = [], []
    for _, adj, truth in datasets:
        nmi_row, ari_row = [], []
        for _, cfg in models:
            results = run_restarts(adj, cfg, restarts, truth, workers)
            nmi_row.append(_mean_std([r.nmi for r in results])["mean"])
            ari_row.append(_mean_std([r.ari for r in results])["mean"])
        nmi_rows.append(nmi_row)
        ari_rows.append(ari_row)
    names = tuple(name for name, _, _ in datasets)
    nmi_table = metrics.ScoreTable(names, tuple(labels), np.array(nmi_rows, dtype=float))
    configs = {lab: _config_echo(m, cfg, restarts) for lab, (m, cfg) in zip(labels, models)}
    ari_table = ari_ranks = None
    if with_ari and all(v is not None for row in ari_rows for v in row):
        ari_table = metrics.ScoreTable(names, tuple(labels), np.array(ari_rows, dtype=float))
        ari_ranks = metrics.friedman_ranks(ari_table)
    return ComparisonReport(nmi_table, metrics.friedman_ranks(nmi_table), ari_table, ari_ranks,
                            configs)


def compare_scores(table: metrics.ScoreTable) -> ComparisonReport:
    """Rank an externally supplied score table (values are taken as given)."""
    return ComparisonReport(table, metrics.friedman_ranks(table))


REPORT_SCHEMAS = {
    "detect": {
        "type": "object",
        "required": ["schema_version", "kind", "config", "graph", "restarts", "aggregate",
                     "best_seed", "objective_trace"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "kind": {"const": "detect"},
            "config": {
                "type": "object",
                "required": ["model", "K", "mu", "lambda", "tol", "max_iters", "seed", "restarts"],
            },
            "restarts": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["seed", "modularity", "nmi", "ari", "asymmetry", "iterations",
                                 "kkt_residual", "converged", "wall_time"],
                },
            },
            "aggregate": {"type": "object"},
            "objective_trace": {"type": "array", "items": {"type": "number"}},
        },
    },
    "sweep": {
        "type": "object",
        "required": ["schema_version", "kind", "config", "lambda_phase", "mu_phase", "selected"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "kind": {"const": "sweep"},
            "lambda_phase": {"type": "object", "required": ["mu", "rows", "best_lambda"]},
            "mu_phase": {"type": "object", "required": ["lambda", "rows", "best_mu"]},
            "selected": {"type": "object", "required": ["lambda", "mu", "mean_modularity"]},
        },
    },
    "compare": {
        "type": "object",
        "required": ["schema_version", "kind", "datasets", "models", "nmi", "friedman_ranks"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "kind": {"const": "compare"},
            "friedman_ranks": {"type": "object", "additionalProperties": {"type": "number"}},
        },
    },
}
