"""Seeded toy corpora with block-structured word embeddings."""

from typing import List, Tuple

import numpy as np

from .embeddings import WordEmbeddingTable, normalize_rows


def topic_embeddings(n_topics: int = 2, words_per_topic: int = 20, dim: int = 16,
                     noise: float = 0.05, seed: int = 0) -> Tuple[WordEmbeddingTable, List[List[str]]]:
    """Words of topic ``i`` live in the ``i``-th block of coordinates, plus noise."""
    if dim % n_topics:
        raise ValueError("dim must be divisible by n_topics")
    rng = np.random.default_rng(seed)
    block = dim // n_topics
    words, rows, topics = [], [], []
    for t in range(n_topics):
        topic_words = []
        for j in range(words_per_topic):
            v = noise * rng.standard_normal(dim)
            v[t * block:(t + 1) * block] += rng.standard_normal(block)
            w = f"t{t}w{j}"
            words.append(w)
            rows.append(v)
            topic_words.append(w)
        topics.append(topic_words)
    table = normalize_rows(WordEmbeddingTable.from_words(words, np.vstack(rows)))
    return table, topics


def topic_corpus(topics: List[List[str]], sentences_per_topic: int = 500, doc_len: int = 10,
                 min_words: int = 4, max_words: int = 8, seed: int = 0) -> List[List[List[str]]]:
    """Single-topic documents, interleaved across topics."""
    rng = np.random.default_rng(seed)
    per_topic = []
    for vocab in topics:
        docs = []
        for start in range(0, sentences_per_topic, doc_len):
            doc = []
            for _ in range(min(doc_len, sentences_per_topic - start)):
                n = int(rng.integers(min_words, max_words + 1))
                doc.append([vocab[i] for i in rng.choice(len(vocab), size=n, replace=False)])
            docs.append(doc)
        per_topic.append(docs)
    corpus = []
    for group in zip(*per_topic):
        corpus.extend(group)
    return corpus
