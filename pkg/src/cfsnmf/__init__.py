"""Community detection with symmetry- and graph-regularized nonnegative matrix factorization.

The CFS model factorizes an adjacency matrix as ``U X^T`` while penalizing the
asymmetry of the product and the roughness of ``X`` over the graph. NMF, SNMF
and GNMF are available as baselines.
"""

from .errors import (
    CFSError,
    ContractViolation,
    DomainError,
    EdgeListParseError,
    NumericalError,
    UndefinedMetricError,
)
from .factorizer import (
    LatentFactors,
    SolveResult,
    SolverConfig,
    cfs_update_step,
    gradients,
    init_factors,
    kkt_residual,
    nmf_update_step,
    objective,
    snmf_update_step,
    solve,
)
from .graph import (
    AdjacencyMatrix,
    GroundTruth,
    LaplacianPair,
    build_laplacian,
    generate_sbm,
    parse_edge_list,
    parse_ground_truth,
    read_edge_list,
    read_ground_truth,
)
from .metrics import ScoreTable, ari, asymmetry, friedman_ranks, modularity, nmi
from .partition import Partition, assign

__version__ = "0.1.0"

__all__ = [
    "CFSError", "ContractViolation", "DomainError", "EdgeListParseError", "NumericalError",
    "UndefinedMetricError",
    "LatentFactors", "SolveResult", "SolverConfig", "cfs_update_step", "gradients",
    "init_factors", "kkt_residual", "nmf_update_step", "objective", "snmf_update_step", "solve",
    "AdjacencyMatrix", "GroundTruth", "LaplacianPair", "build_laplacian", "generate_sbm",
    "parse_edge_list", "parse_ground_truth", "read_edge_list", "read_ground_truth",
    "ScoreTable", "ari", "asymmetry", "friedman_ranks", "modularity", "nmi",
    "Partition", "assign",
]
