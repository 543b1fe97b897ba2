"""Input coercion shared by the estimators and the CLI."""

from typing import List, Sequence, Union

from .errors import CorpusError

Tokens = Union[str, Sequence[str]]


def check_tokens(seq: Tokens) -> List[str]:
    """Whitespace-split strings; pass token lists through as lists."""
    if isinstance(seq, str):
        return seq.split()
    toks = list(seq)
    if not all(isinstance(t, str) for t in toks):
        raise CorpusError("token sequences must contain strings")
    return toks


def check_sequences(X) -> List[List[str]]:
    if isinstance(X, str):
        raise CorpusError("expected a collection of sequences, got a single string")
    return [check_tokens(s) for s in X]


def check_corpus(X) -> List[List[List[str]]]:
    """A corpus is a list of documents, each a list of sentences."""
    if isinstance(X, str):
        raise CorpusError("expected a list of documents, got a string")
    docs = []
    for doc in X:
        sents = [s for s in check_sequences(doc) if s]
        if sents:
            docs.append(sents)
    if not docs:
        raise CorpusError("corpus has no nonempty documents")
    return docs
