import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from sklearn.metrics import average_precision_score

from multifacet.errors import MetricError
from multifacet.evaluation import (LabeledPair, auc_pr, direction_accuracy, pearson, read_sts,
                                   read_turney, rouge_n, rouge_n_f1, spearman, sts_low_split,
                                   turney_accuracy)


def pairs_with(golds):
    return [LabeledPair(["x"], ["y"], g) for g in golds]


# -- correlation ---------------------------------------------------------------

def test_pearson_hand_value():
    # centred: (-1,0,1) and (-4/3,-1/3,5/3); r = 3 / (sqrt(2) * sqrt(42)/3) = 9/sqrt(84)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(9 / math.sqrt(84), abs=1e-15)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)


def test_pearson_extremes():
    xs = [0.5, 1.0, 3.0, 4.5]
    assert pearson(xs, [2 * x for x in xs]) == pytest.approx(1.0)
    assert pearson(xs, [-x + 7 for x in xs]) == pytest.approx(-1.0)


def test_pearson_matches_scipy():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    assert pearson(x, y) == pytest.approx(stats.pearsonr(x, y)[0], abs=1e-12)


@pytest.mark.parametrize("xs,ys", [([1, 1, 1], [1, 2, 3]), ([1], [2]), ([1, 2], [1, 2, 3])])
def test_pearson_errors(xs, ys):
    with pytest.raises(MetricError):
        pearson(xs, ys)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-5, 5))
def test_pearson_affine_invariant(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(8), rng.standard_normal(8)
    assert abs(pearson(a * x + b, y) - pearson(x, y)) < 1e-12


def test_spearman_monotone():
    assert spearman([1, 2, 3, 4], [1, 8, 27, 64]) == pytest.approx(1.0)
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(20), rng.standard_normal(20)
    assert spearman(x, y) == pytest.approx(stats.spearmanr(x, y)[0], abs=1e-12)


# -- low split -----------------------------------------------------------------

def test_sts_low_split_examples():
    assert [p.gold for p in sts_low_split(pairs_with([1, 2, 3, 4]))] == [1, 2]
    assert sts_low_split(pairs_with([2, 2, 2])) == []
    assert [p.gold for p in sts_low_split(pairs_with([0, 5, 5]))] == [0]
    with pytest.raises(MetricError):
        sts_low_split(pairs_with([1]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=15))
def test_sts_low_split_partition(golds):
    pairs = pairs_with(golds)
    low = sts_low_split(pairs)
    rest = [p for p in pairs if all(p is not q for q in low)]
    assert sorted(p.gold for p in low + rest) == sorted(golds)
    assert all(p.gold < np.median(golds) for p in low)


# -- AUC-PR --------------------------------------------------------------------

def test_auc_examples():
    assert auc_pr([1, 1, 0, 0], [0.9, 0.8, 0.2, 0.1]) == 1.0
    assert auc_pr([1, 0], [0.1, 0.9]) == pytest.approx(0.5)
    labels = [1, 0, 0, 1, 0]
    assert auc_pr(labels, [0.3] * 5) == pytest.approx(0.4)


def test_auc_needs_positive():
    with pytest.raises(MetricError):
        auc_pr([0, 0], [0.1, 0.2])
    with pytest.raises(MetricError):
        auc_pr([1, 0], [0.1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_auc_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 25)
    y[0] = 1
    s = np.round(rng.standard_normal(25), 1)  # rounding forces ties
    assert auc_pr(y, s) == pytest.approx(average_precision_score(y, s), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_auc_monotone_invariant(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 20)
    y[0] = 1
    s = np.round(rng.standard_normal(20), 1)
    assert auc_pr(y, np.exp(3 * s) + 1) == pytest.approx(auc_pr(y, s), abs=1e-12)


# -- Turney --------------------------------------------------------------------

def test_turney_examples():
    queries = [("q", ["g", "x", "y", "z", "w"], 0), ("q", ["x", "g", "y"], 1)]
    assert turney_accuracy(queries, lambda q, c: 1.0 if c == "g" else 0.0) == 1.0
    assert turney_accuracy(queries, lambda q, c: 0.3) == 0.0
    mixed = lambda q, c: {"g": 1.0, "y": 2.0}.get(c, 0.0) if q == "q2" else float(c == "g")
    assert turney_accuracy([("q", ["g", "x"], 0), ("q2", ["g", "y"], 0)], mixed) == 0.5


def test_turney_errors():
    with pytest.raises(MetricError):
        turney_accuracy([], lambda q, c: 0)
    with pytest.raises(MetricError):
        turney_accuracy([("q", [], 0)], lambda q, c: 0)


# -- ROUGE ---------------------------------------------------------------------

def test_rouge_examples():
    assert rouge_n("a b c", "a b d") == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    assert rouge_n_f1("a b c", "a b d") == 2 / 3
    assert rouge_n_f1("a b c", "a b c") == 1.0
    assert rouge_n_f1("a b", "c d") == 0.0
    assert rouge_n_f1("a b c", "a b d", 2) == pytest.approx(0.5)


def test_rouge_clipping_and_case():
    # candidate repeats "a" three times but the reference has it once
    p, r, _ = rouge_n("a a a", "A b")
    assert p == pytest.approx(1 / 3) and r == pytest.approx(0.5)


def test_rouge_empty_reference():
    with pytest.raises(MetricError):
        rouge_n_f1("a", "")
    with pytest.raises(MetricError):
        rouge_n_f1("a b", "a", 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcd"), min_size=2, max_size=8),
       st.lists(st.sampled_from("abcd"), min_size=2, max_size=8), st.sampled_from([1, 2]))
def test_rouge_f1_symmetric(a, b, n):
    pa, ra, fa = rouge_n(a, b, n)
    pb, rb, fb = rouge_n(b, a, n)
    assert (pa, ra) == pytest.approx((rb, pb))
    assert fa == pytest.approx(fb, abs=1e-15)


# -- direction accuracy --------------------------------------------------------

def test_direction_accuracy():
    assert direction_accuracy([0.5, -1.0, 2.0], [1, -1, -1]) == pytest.approx(2 / 3)
    assert direction_accuracy([0.0, 0.0], [1, -1]) == 0.5
    with pytest.raises(MetricError):
        direction_accuracy([], [])


# -- readers -------------------------------------------------------------------

def test_read_sts(tmp_path):
    p = tmp_path / "sts.tsv"
    p.write_text("4.5\tA cat sat\tA dog sat\n\n1\tx\ty\n")
    pairs = read_sts(p)
    assert pairs[0].gold == 4.5 and pairs[0].text_a == ["A", "cat", "sat"]
    assert len(pairs) == 2


@pytest.mark.parametrize("line", ["4.5\tonly two\n", "high\ta\tb\n", "nan\ta\tb\n"])
def test_read_sts_errors(tmp_path, line):
    p = tmp_path / "sts.tsv"
    p.write_text(line)
    with pytest.raises(MetricError, match="1"):
        read_sts(p)


def test_read_turney_places_missing_gold_first(tmp_path):
    p = tmp_path / "t.tsv"
    p.write_text("big cat\tlion\ttiger\tdog\nsmall dog\tpuppy\tkitten\tpuppy\n")
    q = read_turney(p)
    assert q[0] == (["big", "cat"], [["lion"], ["tiger"], ["dog"]], 0)
    assert q[1][2] == 1 and q[1][1][1] == ["puppy"]
