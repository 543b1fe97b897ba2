"""Similarity scorers built on codebooks and word embeddings."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from . import nnsc
from .embeddings import DEFAULT_ALPHA, WordEmbeddingTable, WordFrequencyTable
from .errors import ConfigError, EmptyMatrixError, ScoringError

UNIFORM = "uniform"
PROB = "prob"
PROB_X_ATTENTION = "prob_x_attention"
ATTENTION = "attention"
WEIGHTINGS = (UNIFORM, PROB, PROB_X_ATTENTION, ATTENTION)

MAX_WMD_SUPPORT = 64


@dataclass
class ScoreConfig:
    weighting: str = UNIFORM
    alpha: float = DEFAULT_ALPHA
    solver: nnsc.SolverConfig = field(default_factory=nnsc.SolverConfig)
    remove_pc: bool = False

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")


@dataclass
class AttentionVector:
    """Per-word attention; ``positions[i]`` is the sentence index of ``weights[i]``."""

    weights: np.ndarray
    positions: List[int]


def sc_distance(Fu1: np.ndarray, Fu2: np.ndarray, cfg: ScoreConfig = ScoreConfig()) -> float:
    """Symmetric cross-reconstruction distance between two normalised codebooks."""
    return nnsc.er(Fu1, Fu2, cfg.solver) + nnsc.er(Fu2, Fu1, cfg.solver)


def _in_vocab(sentence: Sequence[str], table: WordEmbeddingTable):
    pos = [i for i, w in enumerate(sentence) if w in table]
    if not pos:
        raise EmptyMatrixError(f"no in-vocabulary words in {' '.join(sentence)!r}")
    W = np.vstack([table.vector(sentence[i]) for i in pos]).T
    return W / np.linalg.norm(W, axis=0), pos


def attention_weights(sentence: Sequence[str], Fu: np.ndarray,
                      table: WordEmbeddingTable) -> AttentionVector:
    """``a_j = sum_k max(0, cos(w_j, c_k))`` for each in-vocabulary word."""
    W, pos = _in_vocab(sentence, table)
    Fu = np.asarray(Fu, dtype=np.float64)
    Fu = Fu / np.linalg.norm(Fu, axis=0)
    return AttentionVector(np.maximum(0.0, W.T @ Fu).sum(axis=1), pos)


def word_weights(sentence: Sequence[str], table: WordEmbeddingTable, weighting: str = UNIFORM,
                 freq: Optional[WordFrequencyTable] = None, alpha: float = DEFAULT_ALPHA,
                 codebook: Optional[np.ndarray] = None):
    """Weights of the in-vocabulary words; returns ``(W, weights)``."""
    W, pos = _in_vocab(sentence, table)
    if weighting == UNIFORM:
        w = np.ones(len(pos))
    elif weighting in (PROB, PROB_X_ATTENTION):
        if freq is None:
            raise ConfigError(f"weighting {weighting!r} needs a frequency table")
        w = np.array([alpha / (alpha + freq.prob(sentence[i])) for i in pos])
    elif weighting == ATTENTION:
        w = np.ones(len(pos))
    else:
        raise ConfigError(f"unknown weighting {weighting!r}")
    if weighting in (PROB_X_ATTENTION, ATTENTION):
        if codebook is None:
            raise ConfigError(f"weighting {weighting!r} needs a codebook")
        w = w * attention_weights(sentence, codebook, table).weights
    return W, w


def sentence_vector(sentence, table, weighting=UNIFORM, freq=None, alpha=DEFAULT_ALPHA,
                    codebook=None) -> np.ndarray:
    """Weighted mean of the normalised word embeddings."""
    W, w = word_weights(sentence, table, weighting, freq, alpha, codebook)
    if w.sum() <= 0:
        raise ScoringError("all word weights are zero")
    return W @ w / w.sum()


def cosine(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ScoringError("zero-norm sentence vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def weighted_avg_similarity(s1, s2, table, cfg: ScoreConfig = ScoreConfig(), freq=None,
                            codebook1=None, codebook2=None) -> float:
    """Cosine between the weighted mean embeddings of two sentences."""
    v1 = sentence_vector(s1, table, cfg.weighting, freq, cfg.alpha, codebook1)
    v2 = sentence_vector(s2, table, cfg.weighting, freq, cfg.alpha, codebook2)
    return cosine(v1, v2)


def first_principal_direction(vectors, seed: int = 0, tol: float = 1e-9,
                              max_iters: int = 10000) -> np.ndarray:
    """Top right-singular vector of the (uncentred) stacked vectors by power iteration."""
    X = np.asarray(vectors, dtype=np.float64)
    C = X.T @ X
    if not np.any(C):
        raise ScoringError("cannot take a principal direction of all-zero vectors")
    u = np.random.default_rng(seed).standard_normal(C.shape[0])
    u /= np.linalg.norm(u)
    for _ in range(max_iters):
        nxt = C @ u
        norm = np.linalg.norm(nxt)
        if norm == 0:
            raise ScoringError("power iteration collapsed; restart with another seed")
        nxt /= norm
        if nxt @ u < 0:
            nxt = -nxt
        if np.linalg.norm(nxt - u) < tol:
            return nxt
        u = nxt
    return u


def sif_postprocess(vectors, reference=None, seed: int = 0) -> np.ndarray:
    """Remove the projection on the first principal direction.

    The direction is estimated on ``reference`` when given, otherwise on
    ``vectors`` themselves.
    """
    X = np.asarray(vectors, dtype=np.float64)
    ref = X if reference is None else np.asarray(reference, dtype=np.float64)
    if ref.shape[0] < 2:
        raise ScoringError("need at least two vectors to estimate a principal direction")
    u = first_principal_direction(ref, seed)
    return X - np.outer(X @ u, u)


def _masses(weights, n):
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
        raise ScoringError("transport masses must be nonnegative with positive total")
    return w / w.sum()


def transport_cost(a, b, C) -> float:
    """Exact optimal transport cost between histograms ``a`` and ``b``."""
    m, n = C.shape
    A_eq = np.zeros((m + n, m * n))
    for i in range(m):
        A_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        A_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([a, b])
    res = linprog(C.ravel(), A_eq=A_eq[:-1], b_eq=b_eq[:-1], bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise ScoringError(f"transport LP failed: {res.message}")
    return float(max(res.fun, 0.0))


def wmd(s1, s2, table: WordEmbeddingTable, weights1=None, weights2=None) -> float:
    """Word mover's distance with Euclidean ground cost on normalised embeddings.

    ``weights*`` align with the in-vocabulary words of each sentence (see
    :func:`word_weights`); ``None`` means one unit of mass per occurrence.
    """
    W1, p1 = _in_vocab(s1, table)
    W2, p2 = _in_vocab(s2, table)
    if max(len(p1), len(p2)) > MAX_WMD_SUPPORT:
        raise ScoringError(f"WMD support exceeds {MAX_WMD_SUPPORT} words")
    a = _masses(weights1, len(p1))
    b = _masses(weights2, len(p2))
    diff = W1.T[:, None, :] - W2.T[None, :, :]
    C = np.sqrt(np.maximum(np.sum(diff * diff, axis=-1), 0.0))
    return transport_cost(a, b, C)


def hypernym_diff(codebook_hyper, codebook_hypo, W_hyper, W_hypo,
                  cfg: ScoreConfig = ScoreConfig()) -> float:
    """``Er(F_hyper, W_hypo) - Er(F_hypo, W_hyper)``; positive means the first
    phrase looks like the hypernym."""
    return (nnsc.er(codebook_hyper, W_hypo, cfg.solver)
            - nnsc.er(codebook_hypo, W_hyper, cfg.solver))
