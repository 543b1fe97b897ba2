"""Correlation, ranking and overlap metrics plus task-file readers."""

from collections import Counter
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from .errors import MetricError


@dataclass
class LabeledPair:
    text_a: List[str]
    text_b: List[str]
    gold: float


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise MetricError("pearson needs two equal-length sequences of length >= 2")
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(dx @ dx), np.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise MetricError("pearson undefined: zero variance")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


def spearman(xs, ys) -> float:
    return pearson(rankdata(xs), rankdata(ys))


def sts_low_split(pairs: Sequence[LabeledPair]) -> List[LabeledPair]:
    """Pairs whose gold score is strictly below the median gold score."""
    if len(pairs) < 2:
        raise MetricError("need at least two pairs")
    median = float(np.median([p.gold for p in pairs]))
    return [p for p in pairs if p.gold < median]


def auc_pr(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Area under the step-interpolated precision-recall curve.

    Thresholds run over the distinct scores from high to low, so tied
    scores enter the ranking together.
    """
    y = np.asarray(labels).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise MetricError("labels and scores differ in length")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise MetricError("auc_pr needs at least one positive label")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp = np.cumsum(y)[last]
    seen = last + 1
    precision = tp / seen
    recall = tp / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def turney_accuracy(queries: Sequence[Tuple[object, Sequence[object], int]],
                    scorer: Callable[[object, object], float]) -> float:
    """Share of queries whose gold candidate scores strictly above every other."""
    if not queries:
        raise MetricError("no queries")
    hits = 0
    for query, candidates, gold in queries:
        if not candidates:
            raise MetricError("query without candidates")
        scores = [scorer(query, c) for c in candidates]
        g = scores[gold]
        if all(g > s for i, s in enumerate(scores) if i != gold):
            hits += 1
    return hits / len(queries)


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_tokenize(text) -> List[str]:
    if isinstance(text, str):
        text = text.split()
    return [t.lower() for t in text]


def rouge_n(candidate, reference, n: int = 1) -> Tuple[float, float, float]:
    """Clipped n-gram ``(precision, recall, f1)``."""
    cand = _ngrams(rouge_tokenize(candidate), n)
    ref = _ngrams(rouge_tokenize(reference), n)
    if not ref:
        raise MetricError(f"reference has no {n}-grams")
    overlap = sum((cand & ref).values())
    p = overlap / sum(cand.values()) if cand else 0.0
    r = overlap / sum(ref.values())
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def rouge_n_f1(candidate, reference, n: int = 1) -> float:
    return rouge_n(candidate, reference, n)[2]


def direction_accuracy(diffs: Sequence[float], directions: Sequence[int]) -> float:
    """Share of pairs whose score sign matches ``direction`` (+1 or -1); zero scores count half."""
    if len(diffs) != len(directions) or not diffs:
        raise MetricError("need equal-length, nonempty diffs and directions")
    total = 0.0
    for d, g in zip(diffs, directions):
        if d == 0:
            total += 0.5
        elif np.sign(d) == np.sign(g):
            total += 1.0
    return total / len(diffs)


# -- task files --------------------------------------------------------------

def read_sts(path) -> List[LabeledPair]:
    """TSV ``gold<TAB>sentence_a<TAB>sentence_b``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MetricError(f"{path}:{lineno}: expected 3 tab-separated fields")
            try:
                gold = float(parts[0])
            except ValueError:
                raise MetricError(f"{path}:{lineno}: bad gold score {parts[0]!r}") from None
            if not np.isfinite(gold):
                raise MetricError(f"{path}:{lineno}: non-finite gold score")
            out.append(LabeledPair(parts[1].split(), parts[2].split(), gold))
    return out


def read_phrase_pairs(path) -> List[LabeledPair]:
    """TSV ``label<TAB>phrase_a<TAB>phrase_b`` (same layout as STS)."""
    return read_sts(path)


def read_turney(path) -> List[Tuple[List[str], List[List[str]], int]]:
    """TSV ``query<TAB>gold<TAB>cand1...``; the gold is placed first when not listed."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise MetricError(f"{path}:{lineno}: need query, gold and candidates")
            query, gold, cands = parts[0].split(), parts[1].split(), [c.split() for c in parts[2:]]
            if gold not in cands:
                cands = [gold] + cands
            out.append((query, cands, cands.index(gold)))
    return out
