"""Command-line entry point: ``cfsnmf {detect,sweep,compare,gen-sbm}``.

Exit codes: 0 success, 1 invalid flags or configuration, 2 unreadable or
malformed input, 3 numerical failure during a solve.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import ContractViolation, DomainError, EdgeListParseError, NumericalError
from .factorizer import SolverConfig
from .graph import generate_sbm, read_edge_list, read_ground_truth, write_edge_list, write_ground_truth
from .metrics import parse_score_table

log = logging.getLogger("cfsnmf")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
MODEL_CHOICES = ("nmf", "snmf", "gnmf", "cfs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _solver_flags(p, model_default="cfs", repeat_model=False):
    if repeat_model:
        p.add_argument("--model", choices=MODEL_CHOICES, action="append", dest="models",
                       help="model to compare (repeat for each column)")
    else:
        p.add_argument("--model", choices=MODEL_CHOICES, default=model_default)
    p.add_argument("--k", type=int, default=2, help="number of communities")
    p.add_argument("--mu", type=float, default=2.0 ** -5, help="symmetry-regularizer weight")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0,
                   help="graph-regularizer weight")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfsnmf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="detect communities in one graph")
    p.add_argument("--edges", required=True, type=Path)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--ground-truth", type=Path)
    p.add_argument("--out", type=Path, default=Path("out"))
    _solver_flags(p)

    p = sub.add_parser("sweep", help="modularity sweep over lambda, then mu")
    p.add_argument("--edges", required=True, type=Path)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--ground-truth", type=Path)
    p.add_argument("--out", type=Path, default=Path("out"))
    _solver_flags(p)
    p.set_defaults(mu=harness.DEFAULT_SWEEP_MU)
    p.add_argument("--lambda-grid", type=_float_list, default=list(harness.DEFAULT_LAMBDA_GRID))
    p.add_argument("--mu-grid", type=_float_list, default=list(harness.DEFAULT_MU_GRID))

    p = sub.add_parser("compare", help="compare models by mean NMI and Friedman rank")
    p.add_argument("--edges", type=Path, action="append", default=[])
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--ground-truth", type=Path, action="append", default=[])
    p.add_argument("--scores", type=Path, help="rank an existing score table instead of solving")
    p.add_argument("--out", type=Path)
    _solver_flags(p, repeat_model=True)

    p = sub.add_parser("gen-sbm", help="write a stochastic block model graph and its labels")
    p.add_argument("--blocks", type=_int_list, required=True, help="block sizes, e.g. 50,50")
    p.add_argument("--p-in", type=float, required=True)
    p.add_argument("--p-out", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"))
    return parser


def _config(args, model: str) -> SolverConfig:
    return SolverConfig.for_model(model, K=args.k, mu=args.mu, lam=args.lam, tol=args.tol,
                                  max_iters=args.max_iters, seed=args.seed)


def _check_common(args):
    if args.restarts < 1:
        raise UsageError("--restarts must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")


def _load_graph(edges: Path, weighted: bool, truth_path: Path | None):
    adj = read_edge_list(edges, weighted=weighted)
    if adj.self_loops_skipped:
        log.warning("%s: skipped %d self-loop line(s)", edges, adj.self_loops_skipped)
    truth = None
    if truth_path is not None:
        _, truth = read_ground_truth(truth_path, adj)
    return adj, truth


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_detect(args) -> int:
    _check_common(args)
    cfg = _config(args, args.model)
    adj, truth = _load_graph(args.edges, args.weighted, args.ground_truth)
    report = harness.detect(adj, args.model, cfg, args.restarts, truth, args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    best = report.best
    with open(args.out / "assignments.tsv", "w", encoding="utf-8") as fh:
        for label, comm in zip(adj.node_ids, best.labels):
            fh.write(f"{label}\t{comm}\n")
    _write_json(args.out / "report.json", report.to_dict())
    agg = report.aggregate()
    parts = [f"{k}={agg[k]['mean']:.4f}±{agg[k]['std']:.4f}"
             for k in ("modularity", "nmi", "ari") if agg[k]["mean"] is not None]
    print(f"detect {args.model}: {adj.n} nodes, {adj.n_edges} edges, "
          f"{args.restarts} restarts; " + " ".join(parts))
    return EXIT_OK


def cmd_sweep(args) -> int:
    _check_common(args)
    cfg = _config(args, "cfs")
    try:
        grid = harness.SweepGrid(tuple(args.lambda_grid), tuple(args.mu_grid), args.mu)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    adj, truth = _load_graph(args.edges, args.weighted, args.ground_truth)
    report = harness.sweep(adj, cfg, grid, args.restarts, truth, args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.tsv").write_text(report.to_tsv(), encoding="utf-8")
    _write_json(args.out / "sweep_report.json", report.to_dict())
    print(f"sweep: selected lambda={report.best_lambda!r} mu={report.best_mu!r} "
          f"(mean modularity {report.best_modularity})")
    return EXIT_OK


def cmd_compare(args) -> int:
    if args.scores is not None:
        with open(args.scores, encoding="utf-8") as fh:
            table = parse_score_table(fh)
        report = harness.compare_scores(table)
        text = harness.format_table("score", table, report.ranks, percent=False)
    else:
        _check_common(args)
        models = args.models or []
        if len(models) < 2:
            raise UsageError("compare needs at least two --model flags (or --scores)")
        if not args.edges:
            raise UsageError("compare needs at least one --edges file (or --scores)")
        if len(args.ground_truth) != len(args.edges):
            raise UsageError("give one --ground-truth per --edges file")
        configs = [(m, _config(args, m)) for m in models]
        datasets = []
        for edges, gt in zip(args.edges, args.ground_truth):
            adj, truth = _load_graph(edges, args.weighted, gt)
            datasets.append((edges.stem, adj, truth))
        report = harness.compare(datasets, configs, args.restarts, args.workers)
        text = report.to_text()
    print(text, end="")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_json(args.out / "compare_report.json", report.to_dict())
    return EXIT_OK


def cmd_gen_sbm(args) -> int:
    try:
        adj, truth = generate_sbm(args.blocks, args.p_in, args.p_out, args.seed)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    args.out.mkdir(parents=True, exist_ok=True)
    write_edge_list(adj, args.out / "edges.txt")
    write_ground_truth(adj.node_ids, truth, args.out / "ground_truth.txt")
    print(f"gen-sbm: {adj.n} nodes, {adj.n_edges} edges -> {args.out}")
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "sweep": cmd_sweep, "compare": cmd_compare,
            "gen-sbm": cmd_gen_sbm}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ContractViolation) as exc:
        print(f"cfsnmf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, EdgeListParseError, DomainError) as exc:
        print(f"cfsnmf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"cfsnmf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
