"""Undirected graph ingestion, Laplacian structures and synthetic SBM graphs.

Graphs are held as symmetric CSR matrices. The similarity matrix used by the
graph regularizer is the adjacency matrix itself, so the Laplacian is stored
implicitly as ``(degrees, W)`` and never materialized.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, DomainError, EdgeListParseError

__all__ = [
    "AdjacencyMatrix",
    "LaplacianPair",
    "GroundTruth",
    "parse_edge_list",
    "read_edge_list",
    "write_edge_list",
    "parse_ground_truth",
    "read_ground_truth",
    "write_ground_truth",
    "build_laplacian",
    "generate_sbm",
]


def _to_csr(matrix) -> sp.csr_matrix:
    if sp.issparse(matrix):
        out = sp.csr_matrix(matrix, dtype=np.float64)
    else:
        arr = np.asarray(matrix, dtype=np.float64)
        if arr.ndim != 2:
            raise ContractViolation(f"adjacency must be 2-D, got shape {arr.shape}")
        out = sp.csr_matrix(arr)
    out.eliminate_zeros()
    out.sort_indices()
    return out


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Symmetric nonnegative adjacency matrix of a simple undirected graph.

    ``node_ids[i]`` is the external label of dense index ``i``.
    ``self_loops_skipped`` counts self-loop lines dropped at ingestion.
    """

    matrix: sp.csr_matrix
    node_ids: tuple = ()
    self_loops_skipped: int = 0

    def __post_init__(self):
        m = _to_csr(self.matrix)
        n, n2 = m.shape
        if n != n2:
            raise ContractViolation(f"adjacency must be square, got {m.shape}")
        if m.nnz and m.data.min() < 0:
            raise DomainError("adjacency entries must be nonnegative")
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise DomainError("adjacency entries must be finite")
        if m.diagonal().any():
            raise DomainError("self-loops are not allowed (nonzero diagonal)")
        if (m != m.T).nnz:
            raise DomainError("adjacency matrix must be symmetric")
        ids = tuple(self.node_ids) if self.node_ids else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise ContractViolation(f"{len(ids)} node ids for {n} nodes")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "node_ids", ids)

    @classmethod
    def from_dense(cls, dense, node_ids=()) -> "AdjacencyMatrix":
        return cls(_to_csr(dense), tuple(node_ids))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.matrix.nnz // 2

    @property
    def total_weight(self) -> float:
        """Sum of all entries, i.e. twice the undirected edge weight."""
        return float(self.matrix.sum())

    def index_of(self) -> dict:
        return {label: i for i, label in enumerate(self.node_ids)}

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class LaplacianPair:
    """Implicit Laplacian ``L = D - W`` kept as the degree vector plus ``W``."""

    degrees: np.ndarray
    weights: sp.csr_matrix

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Return ``L @ X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.degrees * X - self.weights @ X
        return self.degrees[:, None] * X - self.weights @ X

    def quadratic_trace(self, X: np.ndarray) -> float:
        """``tr(X^T L X)`` as ``1/2 * sum_ij w_ij ||x_i - x_j||^2``.

        The edge-difference form is cancellation free and never negative.
        """
        X = np.asarray(X, dtype=np.float64)
        coo = self.weights.tocoo()
        diff = X[coo.row] - X[coo.col]
        terms = coo.data * np.einsum("ij,ij->i", diff, diff)
        return 0.5 * _accurate_sum(terms)


@dataclass(frozen=True)
class GroundTruth:
    """Dense community labels ``0..C-1``, aligned with an adjacency's node order."""

    labels: np.ndarray
    community_ids: tuple = field(default=())

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ContractViolation("ground-truth labels must be a vector")
        if labels.size:
            present = np.unique(labels)
            if present[0] != 0 or present[-1] != present.size - 1:
                raise ContractViolation("ground-truth labels must be contiguous from 0")
        object.__setattr__(self, "labels", labels)
        if not self.community_ids:
            k = int(labels.max()) + 1 if labels.size else 0
            object.__setattr__(self, "community_ids", tuple(str(c) for c in range(k)))

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def _accurate_sum(values: np.ndarray) -> float:
    # compensated summation for long sums; numpy's pairwise sum is enough below that
    if values.size > 10_000 and np.all(np.isfinite(values)):
        return math.fsum(values.tolist())
    return float(np.sum(values))


def _iter_lines(text):
    if isinstance(text, str):
        text = io.StringIO(text)
    for lineno, line in enumerate(text, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped.split()


def parse_edge_list(text, weighted: bool = False) -> AdjacencyMatrix:
    """Parse ``src dst [weight]`` lines into a symmetric adjacency matrix.

    ``text`` is a string or any iterable of lines. Node labels are remapped
    to dense indices in order of first appearance. A repeated undirected edge
    keeps the weight seen last. Self-loop lines register their node but add no
    edge; they are counted in ``self_loops_skipped``. Without ``weighted`` any
    third column is ignored and every edge has weight 1.
    """
    index: dict[str, int] = {}
    edges: dict[tuple[int, int], float] = {}
    self_loops = 0

    def node(label):
        if label not in index:
            index[label] = len(index)
        return index[label]

    for lineno, tokens in _iter_lines(text):
        if len(tokens) not in (2, 3):
            raise EdgeListParseError(
                f"expected 'src dst [weight]', got {len(tokens)} fields", lineno
            )
        weight = 1.0
        if weighted and len(tokens) == 3:
            try:
                weight = float(tokens[2])
            except ValueError:
                raise EdgeListParseError(f"bad weight {tokens[2]!r}", lineno) from None
            if not math.isfinite(weight):
                raise DomainError(f"line {lineno}: weight must be finite, got {tokens[2]}")
            if weight < 0:
                raise DomainError(f"line {lineno}: negative weight {weight}")
        i, j = node(tokens[0]), node(tokens[1])
        if i == j:
            self_loops += 1
            continue
        edges[(min(i, j), max(i, j))] = weight

    n = len(index)
    if edges:
        pairs = np.array(list(edges.keys()), dtype=np.int64)
        w = np.fromiter(edges.values(), dtype=np.float64, count=len(edges))
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        mat = sp.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
    else:
        mat = sp.csr_matrix((n, n), dtype=np.float64)
    return AdjacencyMatrix(mat, tuple(index), self_loops)


def read_edge_list(path, weighted: bool = False) -> AdjacencyMatrix:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh, weighted=weighted)


def write_edge_list(adj: AdjacencyMatrix, path) -> None:
    """Write each undirected edge once as ``src dst weight``."""
    upper = sp.triu(adj.matrix, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="utf-8") as fh:
        for k in order:
            i, j, w = upper.row[k], upper.col[k], upper.data[k]
            fh.write(f"{adj.node_ids[i]} {adj.node_ids[j]} {w:g}\n")


def parse_ground_truth(text, adjacency: AdjacencyMatrix | None = None) -> tuple[list, GroundTruth]:
    """Parse ``node_label community_label`` lines.

    Community labels become dense ids in order of first appearance. With an
    ``adjacency`` the labels are reordered to its node order and every node of
    the graph must be labelled exactly once. Returns ``(node_labels, truth)``.
    """
    nodes: list[str] = []
    comms: list[int] = []
    comm_index: dict[str, int] = {}
    seen = set()
    for lineno, tokens in _iter_lines(text):
        if len(tokens) != 2:
            raise EdgeListParseError(
                f"expected 'node_label community_label', got {len(tokens)} fields", lineno
            )
        label, comm = tokens
        if label in seen:
            raise EdgeListParseError(f"node {label!r} labelled twice", lineno)
        seen.add(label)
        if comm not in comm_index:
            comm_index[comm] = len(comm_index)
        nodes.append(label)
        comms.append(comm_index[comm])

    community_ids = tuple(comm_index)
    if adjacency is None:
        return nodes, GroundTruth(np.array(comms, dtype=np.int64), community_ids)

    lookup = dict(zip(nodes, comms))
    missing = [v for v in adjacency.node_ids if v not in lookup]
    if missing:
        raise DomainError(f"{len(missing)} graph nodes lack a ground-truth label, e.g. {missing[0]!r}")
    extra = len(lookup) - adjacency.n
    if extra:
        raise DomainError(f"{extra} ground-truth nodes do not appear in the graph")
    labels = np.array([lookup[v] for v in adjacency.node_ids], dtype=np.int64)
    return list(adjacency.node_ids), GroundTruth(labels, community_ids)


def read_ground_truth(path, adjacency: AdjacencyMatrix | None = None):
    with open(path, encoding="utf-8") as fh:
        return parse_ground_truth(fh, adjacency)


def write_ground_truth(node_ids, truth: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label, comm in zip(node_ids, truth.labels):
            fh.write(f"{label} {truth.community_ids[comm]}\n")


def build_laplacian(adj) -> LaplacianPair:
    """Degrees ``D_ii = sum_l W_il`` with ``W = A``; isolated nodes get 0."""
    W = adj.matrix if isinstance(adj, AdjacencyMatrix) else _to_csr(adj)
    with np.errstate(over="ignore"):  # overflow surfaces later as a numerical error
        degrees = np.asarray(W.sum(axis=1)).ravel()
    return LaplacianPair(degrees, W)


def generate_sbm(block_sizes, p_in: float, p_out: float, seed: int):
    """Sample an undirected stochastic block model.

    Each unordered node pair inside a block is joined independently with
    probability ``p_in``, across blocks with ``p_out``. Block pairs are
    sampled in a fixed order from one ``numpy`` generator, so the same
    arguments always give the same graph.

    Returns
    -------
    (AdjacencyMatrix, GroundTruth)
    """
    sizes = [int(s) for s in block_sizes]
    if not sizes or any(s <= 0 for s in sizes):
        raise DomainError(f"block sizes must be positive, got {list(block_sizes)}")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise DomainError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")

    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    rows, cols = [], []
    for a, sa in enumerate(sizes):
        for b in range(a, len(sizes)):
            sb = sizes[b]
            draw = rng.random((sa, sb))
            if a == b:
                hit = np.triu(draw < p_in, k=1)
            else:
                hit = draw < p_out
            r, c = np.nonzero(hit)
            rows.append(r + offsets[a])
            cols.append(c + offsets[b])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    data = np.ones(2 * r.size)
    mat = sp.csr_matrix((data, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return AdjacencyMatrix(mat), GroundTruth(labels)
