"""Box-constrained non-negative sparse coding and the contrastive set loss.

For a codebook ``F`` (``|E| x K``) and target word matrix ``W`` (``|E| x n``)
the coefficients solve::

    min_M ||F M - W||^2 + lam * sum(M)     s.t.  0 <= M <= 1

Since ``M`` is non-negative, the L1 norm is the plain sum of entries and the
problem is a convex box-constrained quadratic program that separates over the
columns of ``W``.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError

NNSC = "nnsc"
KMEANS = "kmeans"


@dataclass(frozen=True)
class SolverConfig:
    """Inner-solve settings.

    The RMSprop phase (``step_size``, ``decay``, ``epsilon``, ``max_iters``,
    ``rel_tol``) is followed by exact cyclic coordinate minimisation
    (``polish_iters`` sweeps, stopping when no coefficient moves by more than
    ``polish_tol``). Set ``polish_iters=0`` for plain RMSprop.
    """

    lam: float = 0.4
    step_size: float = 0.05
    decay: float = 0.9
    epsilon: float = 1e-8
    max_iters: int = 200
    rel_tol: float = 1e-5
    polish_iters: int = 1000
    polish_tol: float = 1e-12
    mode: str = NNSC

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be nonnegative")
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")
        if not 0 < self.decay < 1:
            raise ConfigError("decay must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        if self.rel_tol < 0 or self.polish_tol < 0 or self.polish_iters < 0:
            raise ConfigError("tolerances and polish_iters must be nonnegative")
        if self.mode not in (NNSC, KMEANS):
            raise ConfigError(f"unknown solver mode {self.mode!r}")


def _check_pair(F, W):
    F = np.asarray(F, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if F.ndim != 2 or W.ndim != 2:
        raise ShapeError("F and W must be 2-d matrices")
    if F.shape[0] != W.shape[0]:
        raise ShapeError(f"row mismatch: F has {F.shape[0]} rows, W has {W.shape[0]}")
    if F.size == 0 or W.size == 0:
        raise ShapeError("F and W must be nonempty")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(W))):
        raise NonFiniteError("non-finite values in F or W")
    return F, W


def penalized_objective(F, W, M, lam) -> float:
    R = F @ M - W
    return float(np.sum(R * R) + lam * np.sum(M))


def _rmsprop(FtF, FtW, WtW, lam, cfg):
    M = np.zeros_like(FtW)
    v = np.zeros_like(M)

    def objective(M):
        # ||FM - W||^2 expanded so only K x K / K x n products are needed
        return float(np.sum(M * (FtF @ M)) - 2.0 * np.sum(M * FtW) + WtW + lam * np.sum(M))

    prev = objective(M)
    for _ in range(cfg.max_iters):
        grad = 2.0 * (FtF @ M - FtW) + lam
        v = cfg.decay * v + (1.0 - cfg.decay) * grad * grad
        M = np.clip(M - cfg.step_size * grad / (np.sqrt(v) + cfg.epsilon), 0.0, 1.0)
        cur = objective(M)
        if abs(prev - cur) <= cfg.rel_tol * max(abs(prev), np.finfo(float).tiny):
            break
        prev = cur
    return M


def _coordinate_polish(M, FtF, FtW, lam, cfg):
    K = M.shape[0]
    diag = np.diag(FtF)
    # near-zero columns barely move the objective and would overflow the step
    floor = 1e-12 * max(1.0, float(diag.max()))
    # gradient/2 of the smooth part plus lam/2, kept up to date row by row
    G = FtF @ M - FtW
    for _ in range(cfg.polish_iters):
        moved = 0.0
        for k in range(K):
            if diag[k] <= floor:
                continue
            old = M[k].copy()
            new = np.clip(old - (G[k] + 0.5 * lam) / diag[k], 0.0, 1.0)
            delta = new - old
            if np.any(delta):
                M[k] = new
                G += np.outer(FtF[:, k], delta)
                moved = max(moved, float(np.max(np.abs(delta))))
        if moved <= cfg.polish_tol:
            break
    return M


def solve_coefficients(F, W, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    """Approximate the NNSC coefficient matrix ``M`` (``K x n``, entries in [0, 1]).

    Starts from ``M = 0``. The result never has a larger penalized objective
    than the all-zero start.
    """
    F, W = _check_pair(F, W)
    if cfg.mode != NNSC:
        raise ConfigError("solve_coefficients requires mode='nnsc'; use kmeans_assign")
    FtF = F.T @ F
    FtW = F.T @ W
    WtW = float(np.sum(W * W))
    M = _rmsprop(FtF, FtW, WtW, cfg.lam, cfg)
    if cfg.polish_iters:
        M = _coordinate_polish(M, FtF, FtW, cfg.lam, cfg)
    if penalized_objective(F, W, M, cfg.lam) > WtW:
        M = np.zeros_like(M)
    return M


def kmeans_assign(F, W) -> np.ndarray:
    """Hard assignment of every word to its nearest center (ties -> lowest k)."""
    F, W = _check_pair(F, W)
    d2 = (np.sum(F * F, axis=0)[:, None] - 2.0 * F.T @ W + np.sum(W * W, axis=0)[None, :])
    M = np.zeros_like(d2)
    M[np.argmin(d2, axis=0), np.arange(W.shape[1])] = 1.0
    return M


def coefficients(F, W, cfg: SolverConfig = SolverConfig()) -> np.ndarray:
    if cfg.mode == KMEANS:
        return kmeans_assign(F, W)
    return solve_coefficients(F, W, cfg)


def reconstruction_error(F, W, M) -> float:
    """``||F M - W||_F^2`` without the sparsity penalty."""
    F = np.asarray(F, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if F.shape[1] != M.shape[0] or W.shape[1] != M.shape[1] or F.shape[0] != W.shape[0]:
        raise ShapeError(f"incompatible shapes F{F.shape} M{M.shape} W{W.shape}")
    R = F @ M - W
    if not np.all(np.isfinite(R)):
        raise NonFiniteError("non-finite reconstruction residual")
    return float(np.sum(R * R))


def er(F, W, cfg: SolverConfig = SolverConfig()) -> float:
    """Reconstruction error of ``W`` by ``F`` at the solved coefficients."""
    return reconstruction_error(F, W, coefficients(F, W, cfg))


def contrastive_loss(F, W_pos, W_neg, cfg: SolverConfig = SolverConfig()
                     ) -> Tuple[float, np.ndarray, np.ndarray]:
    """``Er(F, W_pos) - Er(F, W_neg)`` plus both coefficient matrices."""
    M_pos = coefficients(F, W_pos, cfg)
    M_neg = coefficients(F, W_neg, cfg)
    loss = reconstruction_error(F, W_pos, M_pos) - reconstruction_error(F, W_neg, M_neg)
    return loss, M_pos, M_neg


def loss_gradient_wrt_codebook(F, W_pos, W_neg, M_pos, M_neg) -> np.ndarray:
    """Gradient of the contrastive loss in ``F`` with both ``M`` held fixed."""
    F = np.asarray(F, dtype=np.float64)
    for W, M in ((W_pos, M_pos), (W_neg, M_neg)):
        if np.shape(M) != (F.shape[1], np.shape(W)[1]) or np.shape(W)[0] != F.shape[0]:
            raise ShapeError(f"incompatible shapes F{F.shape} M{np.shape(M)} W{np.shape(W)}")
    return (2.0 * (F @ M_pos - W_pos) @ np.transpose(M_pos)
            - 2.0 * (F @ M_neg - W_neg) @ np.transpose(M_neg))
