"""Multiplicative-update solvers for NMF, SNMF and the symmetry/graph regularized CFS model.

The CFS objective is

    J(U, X) = ||A - U X^T||_F^2 + (mu/2) ||U X^T - X U^T||_F^2 + lam tr(X^T L X)

with ``L = D - W`` and ``W = A``. Setting ``mu = 0`` gives GNMF and
``mu = lam = 0`` gives plain NMF. SNMF uses one factor (``X is U``) and the
damped rule ``u <- u (1/2 + (AU) / 2(UU^TU))``.

Nothing here materializes an ``n x n`` dense matrix: products go through the
sparse adjacency or through ``K x K`` Gram matrices.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ContractViolation, NumericalError
from .graph import AdjacencyMatrix, LaplacianPair, _accurate_sum, _to_csr, build_laplacian

__all__ = [
    "MODELS",
    "LatentFactors",
    "SolverConfig",
    "SolveResult",
    "init_factors",
    "objective",
    "gradients",
    "kkt_residual",
    "nmf_update_step",
    "snmf_update_step",
    "cfs_update_step",
    "solve",
]

MODELS = ("nmf", "snmf", "cfs")
EPS_GUARD = 1e-12


@dataclass
class LatentFactors:
    """Nonnegative ``n x K`` factors with ``U X^T`` approximating ``A``.

    For SNMF ``X`` is the very same array object as ``U``.
    """

    U: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        if self.U.shape != self.X.shape or self.U.ndim != 2:
            raise ContractViolation(
                f"U and X must be matching n x K matrices, got {self.U.shape} and {self.X.shape}"
            )

    @classmethod
    def symmetric(cls, U: np.ndarray) -> "LatentFactors":
        return cls(U, U)

    @property
    def shared(self) -> bool:
        return self.X is self.U

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]

    def copy(self) -> "LatentFactors":
        if self.shared:
            return LatentFactors.symmetric(self.U.copy())
        return LatentFactors(self.U.copy(), self.X.copy())


@dataclass(frozen=True)
class SolverConfig:
    """Model choice, hyperparameters and stopping rule for :func:`solve`.

    ``lam`` is the graph-regularizer weight (``lambda`` in reports). For
    ``nmf`` and ``snmf`` the weights are ignored.
    """

    model: str = "cfs"
    K: int = 2
    mu: float = 0.0
    lam: float = 0.0
    max_iters: int = 500
    tol: float = 1e-6
    seed: int = 0
    eps_guard: float = EPS_GUARD

    def __post_init__(self):
        if self.model not in MODELS:
            raise ContractViolation(f"model must be one of {MODELS}, got {self.model!r}")
        if self.K < 1:
            raise ContractViolation(f"K must be >= 1, got {self.K}")
        if not (self.mu >= 0 and self.lam >= 0):
            raise ContractViolation(f"mu and lambda must be >= 0, got mu={self.mu}, lambda={self.lam}")
        if not self.tol > 0:
            raise ContractViolation(f"tol must be > 0, got {self.tol}")
        if not self.eps_guard > 0:
            raise ContractViolation(f"eps_guard must be > 0, got {self.eps_guard}")
        if self.max_iters < 1:
            raise ContractViolation(f"max_iters must be >= 1, got {self.max_iters}")

    @classmethod
    def for_model(cls, name: str, **kwargs) -> "SolverConfig":
        """Build a config from a CLI model name; ``gnmf`` is CFS with ``mu = 0``."""
        if name == "gnmf":
            kwargs["mu"] = 0.0
            name = "cfs"
        elif name in ("nmf", "snmf"):
            kwargs["mu"] = 0.0
            kwargs["lam"] = 0.0
        return cls(model=name, **kwargs)

    @property
    def weights(self) -> tuple[float, float]:
        """The ``(mu, lam)`` pair actually used by the model's objective."""
        if self.model == "cfs":
            return self.mu, self.lam
        return 0.0, 0.0

    def with_seed(self, seed: int) -> "SolverConfig":
        return replace(self, seed=seed)


@dataclass
class SolveResult:
    factors: LatentFactors
    objective_trace: np.ndarray
    kkt_residual: float
    iterations_run: int
    converged: bool
    wall_time: float
    config: SolverConfig | None = field(default=None, repr=False)


def _csr(A) -> sp.csr_matrix:
    if isinstance(A, AdjacencyMatrix):
        return A.matrix
    if sp.isspmatrix_csr(A) and A.dtype == np.float64:
        return A
    return _to_csr(A)


def _lap(A, lap) -> LaplacianPair:
    return lap if lap is not None else build_laplacian(A)


def _check_dims(A: sp.csr_matrix, f: LatentFactors) -> None:
    n, n2 = A.shape
    if n != n2:
        raise ContractViolation(f"adjacency must be square, got {A.shape}")
    if f.n != n:
        raise ContractViolation(f"factors have {f.n} rows but the graph has {n} nodes")


_QUIET = dict(over="ignore", invalid="ignore", divide="ignore")


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalError()


def init_factors(n: int, K: int, seed: int) -> LatentFactors:
    """Draw ``U`` then ``X`` i.i.d. uniform on ``(0, 1]``."""
    if n < 1 or K < 1:
        raise ContractViolation(f"need n, K >= 1, got n={n}, K={K}")
    rng = np.random.default_rng(seed)
    # 1 - [0, 1) is (0, 1]: exact zeros would stay frozen under multiplicative rules
    U = 1.0 - rng.random((n, K))
    X = 1.0 - rng.random((n, K))
    return LatentFactors(U, X)


def _frobenius_terms(A: sp.csr_matrix, U: np.ndarray, X: np.ndarray):
    """Return ``||A - UX^T||^2`` and ``||UX^T - XU^T||^2`` from sparse/Gram pieces."""
    coo = A.tocoo()
    approx_on_edges = np.einsum("ij,ij->i", U[coo.row], X[coo.col])
    edge_part = _accurate_sum(coo.data * (coo.data - 2.0 * approx_on_edges))
    UtU = U.T @ U
    XtX = X.T @ X
    XtU = X.T @ U
    gram = float(np.sum(UtU * XtX))  # ||UX^T||^2 = tr(U^TU X^TX)
    cross = float(np.sum(XtU * XtU.T))  # tr(UX^T UX^T) = tr((X^TU)^2)
    error = max(edge_part + gram, 0.0)
    asym = max(2.0 * (gram - cross), 0.0)
    return error, asym


def objective(A, lap, f: LatentFactors, mu: float, lam: float) -> float:
    """Evaluate the CFS objective; ``mu = lam = 0`` gives the NMF (and SNMF) loss."""
    W = _csr(A)
    _check_dims(W, f)
    with np.errstate(**_QUIET):
        error, asym = _frobenius_terms(W, f.U, f.X)
        graph = _lap(W, lap).quadratic_trace(f.X) if lam else 0.0
    terms = (error, 0.5 * mu * asym, lam * graph)
    if not all(map(math.isfinite, terms)):
        return math.nan
    return math.fsum(terms)


def gradients(A, lap, f: LatentFactors, mu: float, lam: float):
    """Partial derivatives of the objective with respect to ``U`` and ``X``.

    For shared (SNMF) factors the single-factor loss ``||A - UU^T||^2`` is
    differentiated instead and the same array is returned twice.
    """
    W = _csr(A)
    _check_dims(W, f)
    U, X = f.U, f.X
    if f.shared:
        G = 4.0 * (U @ (U.T @ U)) - 4.0 * (W @ U)
        return G, G
    UtX = U.T @ X
    GU = -2.0 * (W @ X) + 2.0 * (1.0 + mu) * (U @ (X.T @ X)) - 2.0 * mu * (X @ UtX)
    GX = -2.0 * (W @ U) + 2.0 * (1.0 + mu) * (X @ (U.T @ U)) - 2.0 * mu * (U @ UtX.T)
    if lam:
        GX = GX + 2.0 * lam * _lap(W, lap).apply(X)
    return GU, GX


def kkt_residual(A, lap, f: LatentFactors, mu: float, lam: float) -> float:
    """``max |min(factor, gradient)|`` over every entry of ``U`` and ``X``.

    Zero exactly when the gradient vanishes on positive entries and is
    nonnegative on zero entries, i.e. the multipliers ``-min(grad, 0)`` at
    the active bounds satisfy complementary slackness.
    """
    GU, GX = gradients(A, lap, f, mu, lam)
    r_u = float(np.max(np.abs(np.minimum(f.U, GU)), initial=0.0))
    if f.shared:
        return r_u
    r_x = float(np.max(np.abs(np.minimum(f.X, GX)), initial=0.0))
    return max(r_u, r_x)


def nmf_update_step(A, f: LatentFactors, eps_guard: float = EPS_GUARD) -> LatentFactors:
    """One Lee-Seung sweep: ``U`` first, then ``X`` against the new ``U``."""
    W = _csr(A)
    _check_dims(W, f)
    U, X = f.U, f.X
    with np.errstate(**_QUIET):
        U = U * (W @ X) / np.maximum(U @ (X.T @ X), eps_guard)
        X = X * (W @ U) / np.maximum(X @ (U.T @ U), eps_guard)
    _check_finite(U, X)
    return LatentFactors(U, X)


def snmf_update_step(A, f: LatentFactors, eps_guard: float = EPS_GUARD) -> LatentFactors:
    """Damped symmetric rule ``u <- u (1/2 + (AU) / (2 UU^TU))``."""
    W = _csr(A)
    _check_dims(W, f)
    U = f.U
    with np.errstate(**_QUIET):
        U = U * (0.5 + (W @ U) / np.maximum(2.0 * (U @ (U.T @ U)), eps_guard))
    _check_finite(U)
    return LatentFactors.symmetric(U)


def cfs_update_step(A, lap, f: LatentFactors, mu: float, lam: float,
                    eps_guard: float = EPS_GUARD) -> LatentFactors:
    """One CFS sweep (Gauss-Seidel: ``X`` is updated with the new ``U``).

        U <- U * (AX + mu X U^T X) / ((1+mu) U X^T X)
        X <- X * (AU + mu U X^T U + lam W X) / ((1+mu) X U^T U + lam D X)

    Denominators are floored at ``eps_guard``.
    """
    W = _csr(A)
    _check_dims(W, f)
    U, X = f.U, f.X

    with np.errstate(**_QUIET):
        num = W @ X + mu * (X @ (U.T @ X))
        den = (1.0 + mu) * (U @ (X.T @ X))
        U = U * num / np.maximum(den, eps_guard)

        num = W @ U + mu * (U @ (X.T @ U))
        den = (1.0 + mu) * (X @ (U.T @ U))
        if lam:
            L = _lap(W, lap)
            num = num + lam * (L.weights @ X)
            den = den + lam * (L.degrees[:, None] * X)
        X = X * num / np.maximum(den, eps_guard)

    _check_finite(U, X)
    return LatentFactors(U, X)


def _stepper(cfg: SolverConfig, W, lap):
    mu, lam = cfg.weights
    eps = cfg.eps_guard
    if cfg.model == "nmf":
        return lambda f: nmf_update_step(W, f, eps)
    if cfg.model == "snmf":
        return lambda f: snmf_update_step(W, f, eps)
    return lambda f: cfs_update_step(W, lap, f, mu, lam, eps)


def solve(A, lap, cfg: SolverConfig, callback=None) -> SolveResult:
    """Run the model's update rule from a seeded start until the objective settles.

    Stops when ``|J_t - J_{t-1}| / max(J_{t-1}, eps_guard) < tol`` or after
    ``max_iters`` sweeps. ``objective_trace[0]`` is the value at the initial
    point, so the trace has ``iterations_run + 1`` entries. ``callback``, if
    given, is called as ``callback(t, factors)`` after every sweep.
    """
    t0 = time.perf_counter()
    W = _csr(A)
    n = W.shape[0]
    if W.shape[1] != n:
        raise ContractViolation(f"adjacency must be square, got {W.shape}")
    mu, lam = cfg.weights
    lap = _lap(W, lap) if cfg.model == "cfs" and lam else lap

    f = init_factors(n, cfg.K, cfg.seed)
    if cfg.model == "snmf":
        f = LatentFactors.symmetric(f.U)

    trace = [objective(W, lap, f, mu, lam)]
    converged = False
    iterations = 0

    if W.nnz == 0:
        # edgeless graph: zero factors are the exact minimizer of every model,
        # which the damped SNMF rule would only approach geometrically
        zero = np.zeros((n, cfg.K))
        f = LatentFactors.symmetric(zero) if f.shared else LatentFactors(zero, zero.copy())
        trace.append(objective(W, lap, f, mu, lam))
        iterations, converged = 1, True
        if callback is not None:
            callback(1, f)
    else:
        step = _stepper(cfg, W, lap)
        for t in range(1, cfg.max_iters + 1):
            try:
                f = step(f)
            except NumericalError as exc:
                raise exc.at_iteration(t) from None
            J = objective(W, lap, f, mu, lam)
            if not math.isfinite(J):
                raise NumericalError("non-finite objective", iteration=t)
            prev = trace[-1]
            trace.append(J)
            iterations = t
            if callback is not None:
                callback(t, f)
            if abs(J - prev) / max(prev, cfg.eps_guard) < cfg.tol:
                converged = True
                break

    return SolveResult(
        factors=f,
        objective_trace=np.asarray(trace),
        kkt_residual=kkt_residual(W, lap, f, mu, lam),
        iterations_run=iterations,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        config=cfg,
    )
