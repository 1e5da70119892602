"""Evaluation metrics: modularity, NMI, ARI, factor asymmetry and Friedman ranks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import rankdata

from .errors import ContractViolation, EdgeListParseError, UndefinedMetricError
from .graph import AdjacencyMatrix, _to_csr
from .partition import Partition

__all__ = [
    "modularity",
    "modularity_pairwise",
    "nmi",
    "ari",
    "asymmetry",
    "ScoreTable",
    "friedman_ranks",
    "parse_score_table",
    "format_percent",
]


def _labels(p) -> np.ndarray:
    if isinstance(p, Partition):
        return p.labels
    if hasattr(p, "labels"):
        return np.asarray(p.labels, dtype=np.int64)
    return np.asarray(p, dtype=np.int64)


def _adjacency(A) -> sp.csr_matrix:
    return A.matrix if isinstance(A, AdjacencyMatrix) else _to_csr(A)


def _modularity_inputs(A, p):
    W = _adjacency(A)
    labels = _labels(p)
    if labels.shape != (W.shape[0],):
        raise ContractViolation(f"partition covers {labels.size} nodes, graph has {W.shape[0]}")
    two_m = math.fsum(W.data.tolist())
    if two_m <= 0:
        raise UndefinedMetricError("modularity is undefined for a graph without edges")
    return W, labels, two_m


def _group_fsum(keys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Correctly rounded sum of ``values`` per distinct key."""
    if keys.size == 0:
        return np.zeros(0)
    order = np.argsort(keys, kind="stable")
    keys, values = keys[order], values[order]
    starts = np.flatnonzero(keys[1:] != keys[:-1]) + 1
    return np.array([math.fsum(c.tolist()) for c in np.split(values, starts)])


def modularity(A, p) -> float:
    """Newman modularity in grouped form ``sum_c (e_c/m - (d_c/2m)^2)``.

    ``e_c`` is the edge weight inside community ``c`` and ``d_c`` its total
    degree; ``2m`` is the sum of all adjacency entries.
    """
    W, labels, two_m = _modularity_inputs(A, p)
    _, comm = np.unique(labels, return_inverse=True)
    coo = W.tocoo()
    src, dst = comm[coo.row], comm[coo.col]
    inside = src == dst
    # summing over both (i, j) and (j, i) gives 2 e_c; d_c sums rows of community c
    twice_e = _group_fsum(src[inside], coo.data[inside])
    d = _group_fsum(src, coo.data)
    # one division at the end: exact numerators give a correctly rounded Q
    num = math.fsum(twice_e * two_m) - math.fsum(d * d)
    return num / (two_m * two_m)


def modularity_pairwise(A, p) -> float:
    """Pair-sum modularity ``(1/2m) sum_ij (a_ij - k_i k_j / 2m) delta(c_i, c_j)``.

    Dense ``O(n^2)``; kept as a cross-check for :func:`modularity`.
    """
    W, labels, two_m = _modularity_inputs(A, p)
    dense = W.toarray()
    k = dense.sum(axis=1)
    same = labels[:, None] == labels[None, :]
    return float(np.sum((dense - np.outer(k, k) / two_m)[same]) / two_m)


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape or a.ndim != 1:
        raise ContractViolation(f"partitions must have equal length, got {a.size} and {b.size}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(p1, p2) -> float:
    """Normalized mutual information ``2 I / (H1 + H2)`` with natural logs.

    Returns 1 when both partitions are trivial (zero entropy) and 0 when only
    one of them is.
    """
    a, b = _labels(p1), _labels(p2)
    table = _contingency(a, b)
    n = a.size
    if n == 0:
        raise ContractViolation("partitions are empty")
    h1 = _entropy(table.sum(axis=1), n)
    h2 = _entropy(table.sum(axis=0), n)
    if h1 + h2 == 0:
        return 1.0
    if h1 == 0 or h2 == 0:
        return 0.0
    rows, cols = np.nonzero(table)
    nij = table[rows, cols].astype(np.float64)
    ni = table.sum(axis=1)[rows].astype(np.float64)
    nj = table.sum(axis=0)[cols].astype(np.float64)
    mi = float(np.sum(nij / n * np.log(n * nij / (ni * nj))))
    return min(max(2.0 * mi / (h1 + h2), 0.0), 1.0)


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def ari(p1, p2) -> float:
    """Adjusted Rand index (Hubert & Arabie) from the contingency table."""
    a, b = _labels(p1), _labels(p2)
    table = _contingency(a, b)
    n = a.size
    if n < 2:
        raise UndefinedMetricError("ARI needs at least two nodes")
    index = float(np.sum(_comb2(table)))
    sum_a = float(np.sum(_comb2(table.sum(axis=1))))
    sum_b = float(np.sum(_comb2(table.sum(axis=0))))
    expected = sum_a * sum_b / float(_comb2(n))
    maximum = 0.5 * (sum_a + sum_b)
    if maximum == expected:
        # both partitions trivial in the same way (all-one or all-singletons)
        return 1.0
    return (index - expected) / (maximum - expected)


def asymmetry(f, dense_limit: int = 2048, eps: float = 1e-300) -> float:
    """Relative asymmetry ``||UX^T - XU^T||_F / ||UX^T||_F`` of latent factors.

    Up to ``dense_limit`` nodes the ``n x n`` product is formed directly;
    beyond that the norms come from ``K x K`` Gram matrices.
    """
    U = np.asarray(f.U, dtype=np.float64)
    X = np.asarray(f.X, dtype=np.float64)
    if U.shape != X.shape or U.ndim != 2:
        raise ContractViolation(f"factor shapes differ: {U.shape} vs {X.shape}")
    if U.shape[0] <= dense_limit:
        P = U @ X.T
        return float(np.linalg.norm(P - P.T) / max(np.linalg.norm(P), eps))
    XtU = X.T @ U
    norm2 = float(np.sum((U.T @ U) * (X.T @ X)))
    asym2 = max(2.0 * (norm2 - float(np.sum(XtU * XtU.T))), 0.0)
    return math.sqrt(asym2) / max(math.sqrt(max(norm2, 0.0)), eps)


@dataclass(frozen=True)
class ScoreTable:
    """Datasets x models matrix of mean scores, higher is better."""

    datasets: tuple
    models: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.datasets), len(self.models)):
            raise ContractViolation(
                f"score matrix shape {values.shape} does not match "
                f"{len(self.datasets)} datasets x {len(self.models)} models"
            )
        if not np.all(np.isfinite(values)):
            raise ContractViolation("score table has missing or non-finite cells")
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "values", values)


def friedman_ranks(t: ScoreTable) -> dict:
    """Average per-dataset rank of each model (1 = best, ties share the mean rank)."""
    if t.values.size == 0:
        raise ContractViolation("score table is empty")
    ranks = np.vstack([rankdata(-row, method="average") for row in t.values])
    return dict(zip(t.models, ranks.mean(axis=0).tolist()))


def _score_cell(token: str, lineno: int) -> float:
    # accepts "43.11", "43.11±0.93" and win/loss markers such as "77.03±0.71●"
    value = token.split("±", 1)[0].rstrip("●*")
    try:
        return float(value)
    except ValueError:
        raise EdgeListParseError(f"bad score {token!r}", lineno) from None


def parse_score_table(text) -> ScoreTable:
    """Read a whitespace-separated score table.

    The first non-comment line is a header whose first cell is ignored and
    whose remaining cells name the models. Every following line is
    ``dataset score score ...``.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    header = None
    datasets, rows = [], []
    for lineno, line in enumerate(text, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = stripped.split()
        if header is None:
            header = cells[1:]
            if not header:
                raise EdgeListParseError("header names no models", lineno)
            continue
        if len(cells) != len(header) + 1:
            raise EdgeListParseError(
                f"expected {len(header)} scores, got {len(cells) - 1}", lineno
            )
        datasets.append(cells[0])
        rows.append([_score_cell(c, lineno) for c in cells[1:]])
    if header is None or not rows:
        raise EdgeListParseError("score table is empty")
    return ScoreTable(tuple(datasets), tuple(header), np.array(rows))


def format_percent(value) -> str:
    """Two-decimal percentage, e.g. ``0.70021 -> '70.02'``; ``None`` stays ``'-'``."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{100.0 * value:.2f}"
