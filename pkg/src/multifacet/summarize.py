"""Extractive summarisation by greedy facet coverage of the document words."""

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .embeddings import DEFAULT_ALPHA, WordEmbeddingTable, WordFrequencyTable, is_stopword
from .errors import ConfigError, CorpusError, EmptyMatrixError

CODEBOOK = "codebook"
SENT_EMB = "sent_emb"
W_EMB = "w_emb"


@dataclass
class Document:
    sentences: List[List[str]]
    reference: Optional[List[str]] = None

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError("document has no sentences")


@dataclass
class FacetSource:
    """Where sentence facets come from.

    ``model`` is anything with a ``codebook(tokens)`` method returning an
    ``|E| x K`` matrix (normally a :class:`~multifacet.facet_model.FacetModel`).
    """

    mode: str = CODEBOOK
    model: object = None
    length_normalize: bool = False

    def __post_init__(self):
        if self.mode not in (CODEBOOK, SENT_EMB, W_EMB):
            raise ConfigError(f"unknown facet source {self.mode!r}")
        if self.mode == CODEBOOK and self.model is None:
            raise ConfigError("codebook facets need a model")
        if self.mode == W_EMB:
            self.length_normalize = True


@dataclass
class Summary:
    order: List[int]
    gains: List[float]
    objective: float
    length: int = 0


def _unit_columns(M):
    M = np.asarray(M, dtype=np.float64)
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise EmptyMatrixError("facet with zero norm")
    return M / norms


def sentence_facets(sentence: Sequence[str], source: FacetSource,
                    table: WordEmbeddingTable) -> np.ndarray:
    """Unit facet vectors of one sentence as the columns of an ``|E| x m`` matrix."""
    if source.mode == CODEBOOK:
        return _unit_columns(source.model.codebook(list(sentence)))
    vecs = [table.vector(w) for w in sentence if w in table]
    if not vecs:
        raise EmptyMatrixError(f"no in-vocabulary words in {' '.join(sentence)!r}")
    W = _unit_columns(np.vstack(vecs).T)
    if source.mode == SENT_EMB:
        return _unit_columns(W.mean(axis=1, keepdims=True))
    return W


def document_words(doc: Document, table: WordEmbeddingTable, freq: WordFrequencyTable,
                   alpha: float = DEFAULT_ALPHA, exclude_stopwords: bool = True):
    """Normalised embeddings (columns) and SIF weights of every word occurrence."""
    cols, weights = [], []
    for sent in doc.sentences:
        for w in sent:
            if (exclude_stopwords and is_stopword(w)) or w not in table:
                continue
            cols.append(table.vector(w))
            weights.append(alpha / (alpha + freq.prob(w)))
    if not cols:
        return np.zeros((table.dim, 0)), np.zeros(0)
    return _unit_columns(np.vstack(cols).T), np.array(weights)


def _coverage(facets, words):
    # per-word best similarity, floored at the empty-summary value 0
    if facets.shape[1] == 0 or words.shape[1] == 0:
        return np.zeros(words.shape[1])
    return np.maximum(0.0, (words.T @ facets).max(axis=1))


def coverage_objective(facets, doc: Document, freq: WordFrequencyTable, table: WordEmbeddingTable,
                       alpha: float = DEFAULT_ALPHA, exclude_stopwords: bool = True) -> float:
    """Weighted sum over document words of their best facet similarity."""
    words, weights = document_words(doc, table, freq, alpha, exclude_stopwords)
    return float(weights @ _coverage(np.asarray(facets, dtype=np.float64), words))


def greedy_cover(facet_sets: Sequence[np.ndarray], words: np.ndarray, weights: np.ndarray,
                 k: int = 3, lengths: Optional[Sequence[int]] = None) -> Summary:
    """Greedy maximisation of the coverage objective over candidate facet sets.

    When ``lengths`` is given the candidate ranking uses gain divided by
    length; reported gains are always the raw objective increments.
    """
    if k < 1:
        raise ConfigError("k must be at least 1")
    sims = [_coverage(np.asarray(f, dtype=np.float64), words) for f in facet_sets]
    best = np.zeros(words.shape[1])
    chosen: List[int] = []
    gains: List[float] = []
    for _ in range(min(k, len(facet_sets))):
        top, top_score, top_gain = None, -np.inf, 0.0
        for i, s in enumerate(sims):
            if i in chosen:
                continue
            gain = float(weights @ (np.maximum(best, s) - best))
            score = gain / lengths[i] if lengths is not None else gain
            if score > top_score:
                top, top_score, top_gain = i, score, gain
        chosen.append(top)
        gains.append(top_gain)
        best = np.maximum(best, sims[top])
    return Summary(chosen, gains, float(weights @ best))


def greedy_select(doc: Document, k: int = 3, source: FacetSource = None,
                  freq: WordFrequencyTable = None, table: WordEmbeddingTable = None,
                  alpha: float = DEFAULT_ALPHA, exclude_stopwords: bool = True) -> Summary:
    """Pick up to ``k`` sentences; ties go to the lowest sentence index."""
    words, weights = document_words(doc, table, freq, alpha, exclude_stopwords)
    facet_sets = []
    for sent in doc.sentences:
        try:
            facet_sets.append(sentence_facets(sent, source, table))
        except EmptyMatrixError:
            facet_sets.append(np.zeros((table.dim, 0)))
    lengths = [max(len(s), 1) for s in doc.sentences] if source.length_normalize else None
    summary = greedy_cover(facet_sets, words, weights, k, lengths)
    summary.length = sum(len(doc.sentences[i]) for i in summary.order)
    return summary


def tokenize(text: str) -> List[str]:
    return text.split()


def read_documents(path) -> List[Document]:
    """JSON-lines records ``{"sentences": [...], "reference": "..."}``."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            sents = [tokenize(s) for s in rec.get("sentences", [])]
            sents = [s for s in sents if s]
            if not sents:
                raise CorpusError(f"{path}:{lineno}: empty document record")
            ref = rec.get("reference")
            docs.append(Document(sents, tokenize(ref) if ref else None))
    return docs
