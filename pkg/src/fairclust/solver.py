"""Multiplicative-update solver for fair symmetric NMTF.

Minimizes ``||A - H W H^T||_F^2 + lam * Tr(H^T L H)`` over nonnegative
``H`` (n x k) and ``W`` (k x k), alternating one H step and one W step.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np
import scipy.sparse as sp

from fairclust.contrastive import ContrastiveSystem, build_contrastive
from fairclust.graph import ClusterLabels, Graph, GroupAssignment

logger = logging.getLogger(__name__)

# above this node count the adjacency stays sparse inside the solver
DENSE_LIMIT = 4000


class NumericalError(FloatingPointError):
    """Non-finite values appeared during optimization.

    ``fit`` fills in the iteration reached and the loss trace up to the abort.
    """

    def __init__(self, message, iteration=None, loss_trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.loss_trace = loss_trace


@dataclass
class FactorPair:
    H: np.ndarray
    W: np.ndarray

    def copy(self) -> "FactorPair":
        return FactorPair(self.H.copy(), self.W.copy())


@dataclass
class SolverConfig:
    k: int
    lam: float = 0.0
    max_iters: int = 500
    tol: float = 1e-6
    eps: float = 1e-10
    seed: int = 0
    init: str = "uniform_random"
    # 1/4 is the exact KKT-derived rule; 1/2 is kept for ablation
    exponent: float = 0.25
    regularize: bool = True
    include_diagonal: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError("lambda must be a finite value >= 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.init not in ("uniform_random", "provided"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")


@dataclass
class RunResult:
    factors: FactorPair
    labels: ClusterLabels
    loss_trace: np.ndarray
    iterations: int
    converged: bool
    manifest: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return float(self.loss_trace[-1])


def _check_factors(H, W):
    if H.ndim != 2 or W.ndim != 2 or W.shape != (H.shape[1], H.shape[1]):
        raise ValueError(f"factor shape mismatch: H {H.shape}, W {W.shape}")
    if np.isnan(H).any() or np.isnan(W).any():
        raise NumericalError("NaN in factors")


def objective(A, H, W, L=None, lam: float = 0.0) -> float:
    """Reconstruction error plus ``lam`` times Tr(H^T L H).

    ``L`` is a dense Laplacian, a :class:`ContrastiveSystem`, or None for the
    plain NMTF loss.
    """
    H = np.asarray(H, dtype=float)
    W = np.asarray(W, dtype=float)
    _check_factors(H, W)
    if A.shape != (H.shape[0], H.shape[0]):
        raise ValueError(f"dimension mismatch: A {A.shape}, H {H.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        fro = _reconstruction_error(A, H, W)
    loss = float(fro)
    if L is not None:
        if isinstance(L, ContrastiveSystem):
            reg = L.regularizer(H)
        else:
            reg = float(np.trace(H.T @ np.asarray(L) @ H))
        loss += lam * reg
    if not np.isfinite(loss):
        raise NumericalError(f"objective is not finite: {loss}")
    return loss


def _reconstruction_error(A, H, W):
    if sp.issparse(A):
        # expand the square to avoid forming the dense n x n residual
        G = H.T @ H
        cross = np.sum((H.T @ (A @ H)) * W.T)
        fro = A.multiply(A).sum() - 2.0 * cross + np.sum((W.T @ G) * (W @ G).T)
    else:
        if np.isnan(A).any():
            raise NumericalError("NaN in adjacency")
        R = A - H @ W @ H.T
        fro = np.sum(R * R)
    return fro


def update_H(
    A,
    H,
    W,
    Lplus=None,
    Lminus=None,
    lam: float = 0.0,
    eps: float = 1e-10,
    exponent: float = 0.25,
    contrast: ContrastiveSystem | None = None,
) -> np.ndarray:
    """One multiplicative step on the membership matrix.

    The regularizer enters through ``Lplus``/``Lminus`` (dense) or through a
    :class:`ContrastiveSystem`; pass neither to drop it entirely.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        HW = H @ W
        numer = A.T @ HW + A @ (H @ W.T)
        G = H.T @ H
        denom = H @ (W.T @ G @ W) + H @ (W @ G @ W.T)
        if contrast is not None:
            plus, minus = contrast.split_dot(H)
            numer = numer + lam * minus
            denom = denom + lam * plus
        elif Lplus is not None or Lminus is not None:
            numer = numer + lam * (Lminus @ H)
            denom = denom + lam * (Lplus @ H)
        H_new = H * (numer / (denom + eps)) ** exponent
    if not np.all(np.isfinite(H_new)):
        raise NumericalError("non-finite entries in H update; check eps and input scale")
    return H_new


def update_W(A, H, W, eps: float = 1e-10) -> np.ndarray:
    """One multiplicative step on the cluster-interaction matrix."""
    with np.errstate(over="ignore", invalid="ignore"):
        G = H.T @ H
        W_new = W * (H.T @ (A @ H)) / (G @ W @ G + eps)
    if not np.all(np.isfinite(W_new)):
        raise NumericalError("non-finite entries in W update; check eps and input scale")
    return W_new


def initialize(n: int, k: int, seed: int, scale: float = 1.0) -> FactorPair:
    """Strictly positive random start: H ~ U(0.01, 1.01), W = I + 0.01."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds node count n={n}")
    rng = np.random.default_rng(seed)
    H = scale * (rng.random((n, k)) + 0.01)
    W = np.eye(k) + 0.01
    return FactorPair(H, W)


def assign_clusters(H) -> ClusterLabels:
    """Row-wise argmax; ties go to the lowest cluster index."""
    H = np.asarray(H)
    k = H.shape[1]
    zero_rows = np.nonzero(~H.any(axis=1))[0]
    if zero_rows.size:
        warnings.warn(
            f"{zero_rows.size} node(s) have all-zero membership; assigned to cluster 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return ClusterLabels(np.argmax(H, axis=1), k)


def _solver_matrix(graph: Graph):
    if graph.n <= DENSE_LIMIT:
        return graph.dense()
    return graph.adjacency


def fit(
    graph: Graph,
    groups: GroupAssignment | None,
    config: SolverConfig,
    initial: FactorPair | None = None,
) -> RunResult:
    """Run the alternating updates until ``max_iters`` or relative loss change < ``tol``."""
    if graph.n_edges == 0:
        raise ValueError("graph has no edges")
    n, k = graph.n, config.k
    contrast = None
    if config.regularize:
        if groups is None:
            raise ValueError("groups are required when the regularizer is enabled")
        if groups.n != n:
            raise ValueError(f"groups cover {groups.n} nodes, graph has {n}")
        contrast = build_contrastive(groups, config.include_diagonal)
    if config.init == "provided":
        if initial is None:
            raise ValueError("init='provided' requires initial factors")
        factors = initial.copy()
        if factors.H.shape != (n, k):
            raise ValueError(f"initial H has shape {factors.H.shape}, expected {(n, k)}")
        _check_factors(factors.H, factors.W)
    else:
        factors = initialize(n, k, config.seed)

    A = _solver_matrix(graph)
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()

    H, W = factors.H, factors.W
    trace = [objective(A, H, W, contrast, config.lam)]
    converged = False
    increases = 0
    it = 0
    while it < config.max_iters:
        try:
            H = update_H(A, H, W, lam=config.lam, eps=config.eps,
                         exponent=config.exponent, contrast=contrast)
            W = update_W(A, H, W, eps=config.eps)
            loss = objective(A, H, W, contrast, config.lam)
        except NumericalError as exc:
            raise NumericalError(f"iteration {it + 1}: {exc}", it + 1, np.array(trace)) from None
        it += 1
        prev = trace[-1]
        trace.append(loss)
        if loss > prev:
            increases += 1
            logger.debug("objective increased at iteration %d: %.6g -> %.6g", it, prev, loss)
        if abs(loss - prev) / max(abs(prev), config.eps) < config.tol:
            converged = True
            break
    if increases:
        logger.warning("objective increased on %d of %d iterations", increases, it)

    wall_ms = (time.perf_counter() - t0) * 1000.0
    from fairclust import __version__

    manifest = {
        "seed": config.seed,
        "k": k,
        "lambda": config.lam,
        "iterations": it,
        "final_loss": trace[-1],
        "wall_time_ms": wall_ms,
        "tolerance": config.tol,
        "version": __version__,
        "converged": converged,
        "config": asdict(config),
        "started_at": started.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
    }
    return RunResult(
        factors=FactorPair(H, W),
        labels=assign_clusters(H),
        loss_trace=np.array(trace),
        iterations=it,
        converged=converged,
        manifest=manifest,
    )
