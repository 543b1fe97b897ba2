"""Pre-trained word embedding space, word frequencies and SIF weights."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, EmbeddingFormatError, EmptyMatrixError

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 1e-4


@dataclass
class WordEmbeddingTable:
    """Token to row mapping over a dense ``|V| x |E|`` matrix."""

    vocab: Dict[str, int]
    vectors: np.ndarray
    lowercase: bool = False
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise EmbeddingFormatError("vectors must be a 2-d matrix")
        if len(self.vocab) != self.vectors.shape[0]:
            raise EmbeddingFormatError(
                f"vocab has {len(self.vocab)} tokens but matrix has {self.vectors.shape[0]} rows")
        if sorted(self.vocab.values()) != list(range(len(self.vocab))):
            raise EmbeddingFormatError("vocab indices must cover every row exactly once")

    @classmethod
    def from_words(cls, words: Sequence[str], vectors, lowercase: bool = False):
        vocab = {}
        for i, w in enumerate(words):
            if w in vocab:
                raise EmbeddingFormatError(f"duplicate token {w!r}")
            vocab[w] = i
        return cls(vocab, np.asarray(vectors, dtype=np.float64), lowercase)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def words(self) -> List[str]:
        out = [""] * len(self.vocab)
        for w, i in self.vocab.items():
            out[i] = w
        return out

    def __len__(self):
        return len(self.vocab)

    def key(self, token: str) -> str:
        return token.lower() if self.lowercase else token

    def __contains__(self, token: str) -> bool:
        return self.key(token) in self.vocab

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab[self.key(token)]]

    def nearest(self, query: np.ndarray, top: int = 3) -> List[Tuple[str, float]]:
        """Vocabulary words with the highest cosine similarity to ``query``."""
        q = np.asarray(query, dtype=np.float64)
        norms = np.linalg.norm(self.vectors, axis=1) * np.linalg.norm(q)
        sims = self.vectors @ q / np.where(norms > 0, norms, 1.0)
        order = np.argsort(-sims, kind="stable")[:top]
        words = self.words
        return [(words[i], float(sims[i])) for i in order]


def load_embeddings(path, expected_dim: Optional[int] = None,
                    lowercase: bool = False) -> WordEmbeddingTable:
    """Parse a GloVe-style text file: ``token v1 v2 ... vE`` per line.

    The dimension is fixed by the first record. With ``lowercase`` the tokens
    are case-folded on load and the first occurrence of a folded token wins.
    """
    words: List[str] = []
    rows: List[np.ndarray] = []
    seen = set()
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip("\r").split(" ")
            parts = [p for p in parts if p != ""]
            if not parts:
                continue
            token, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise EmbeddingFormatError(f"line {lineno}: no vector components")
                if expected_dim is not None and dim != expected_dim:
                    raise EmbeddingFormatError(
                        f"line {lineno}: dimension {dim} does not match expected {expected_dim}")
            if len(comps) != dim:
                raise EmbeddingFormatError(
                    f"line {lineno}: expected {dim} components, found {len(comps)}")
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(f"line {lineno}: non-numeric component ({exc})") from None
            if lowercase:
                token = token.lower()
            if token in seen:
                logger.warning("line %d: duplicate token %r ignored", lineno, token)
                continue
            seen.add(token)
            words.append(token)
            rows.append(vec)
    if dim is None:
        raise EmbeddingFormatError(f"{path}: empty embedding file")
    return WordEmbeddingTable.from_words(words, np.vstack(rows), lowercase=lowercase)


def normalize_rows(table: WordEmbeddingTable) -> WordEmbeddingTable:
    """Scale every row to unit 2-norm, dropping all-zero rows."""
    norms = np.linalg.norm(table.vectors, axis=1)
    keep = norms > 0
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("normalize_rows: dropped %d all-zero rows", dropped)
    words = [w for w, k in zip(table.words, keep) if k]
    vecs = table.vectors[keep] / norms[keep, None]
    out = WordEmbeddingTable.from_words(words, vecs, lowercase=table.lowercase)
    out.dropped = table.dropped + dropped
    return out


def lookup_matrix(words: Sequence[str], table: WordEmbeddingTable) -> Tuple[np.ndarray, int]:
    """Stack in-vocabulary word vectors as columns; returns ``(matrix, n_skipped)``."""
    idx = [table.vocab[table.key(w)] for w in words if table.key(w) in table.vocab]
    skipped = len(words) - len(idx)
    if not idx:
        raise EmptyMatrixError(f"no in-vocabulary words among {len(words)} tokens")
    return table.vectors[idx].T.copy(), skipped


@dataclass
class WeightingConfig:
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


@dataclass
class WordFrequencyTable:
    counts: Dict[str, int] = field(default_factory=dict)
    total: int = 0

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ConfigError("counts must be nonnegative")
        if self.total != sum(self.counts.values()):
            raise ConfigError("total must equal the sum of counts")

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sequence[str]]) -> "WordFrequencyTable":
        counter = Counter()
        for sent in sentences:
            counter.update(sent)
        return cls(dict(counter), sum(counter.values()))

    def prob(self, token: str) -> float:
        if self.total == 0:
            return 0.0
        return self.counts.get(token, 0) / self.total

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#total\t{self.total}\n")
            for tok in sorted(self.counts):
                fh.write(f"{tok}\t{self.counts[tok]}\n")

    @classmethod
    def load(cls, path) -> "WordFrequencyTable":
        counts = {}
        total = None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                key, _, value = line.partition("\t")
                if lineno == 1 and key == "#total":
                    total = int(value)
                    continue
                try:
                    counts[key] = counts.get(key, 0) + int(value)
                except ValueError:
                    raise EmbeddingFormatError(f"{path}:{lineno}: bad count {value!r}") from None
        if total is None:
            raise EmbeddingFormatError(f"{path}: missing '#total' header")
        return cls(counts, total)


def sif_weight(word: str, freq: WordFrequencyTable,
               cfg: WeightingConfig = WeightingConfig()) -> float:
    """Smooth inverse frequency weight ``alpha / (alpha + p(w))``."""
    return cfg.alpha / (cfg.alpha + freq.prob(word))


@lru_cache(maxsize=1)
def stopwords() -> frozenset:
    text = resources.files("multifacet").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(line for line in text.splitlines() if line)


def is_stopword(token: str) -> bool:
    return token.lower() in stopwords()
