import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multifacet.embeddings import WordEmbeddingTable, WordFrequencyTable
from multifacet.errors import ConfigError, CorpusError
from multifacet.summarize import (CODEBOOK, SENT_EMB, W_EMB, Document, FacetSource,
                                  coverage_objective, document_words, greedy_cover, greedy_select,
                                  read_documents, sentence_facets)

from _support import basis_table


class AxisModel:
    """Stand-in facet model: each token ``eI`` contributes axis ``I`` as a facet."""

    def __init__(self, dim):
        self.dim = dim

    def codebook(self, tokens):
        cols = sorted({int(t[1:]) for t in tokens})
        return np.eye(self.dim)[:, cols]


def uniform_freq(table):
    return WordFrequencyTable({w: 1 for w in table.words}, len(table))


def test_facet_sources():
    t = basis_table(4)
    assert sentence_facets(["e0", "e2"], FacetSource(CODEBOOK, AxisModel(4)), t).shape == (4, 2)
    np.testing.assert_allclose(sentence_facets(["e1"], FacetSource(SENT_EMB), t)[:, 0], np.eye(4)[1])
    assert sentence_facets(["e0", "e1", "e3"], FacetSource(W_EMB), t).shape == (4, 3)
    assert FacetSource(W_EMB).length_normalize


def test_codebook_source_needs_model():
    with pytest.raises(ConfigError):
        FacetSource(CODEBOOK)
    with pytest.raises(ConfigError):
        FacetSource("mystery", AxisModel(2))


def test_perfect_coverage_equals_weight_sum():
    t = basis_table(3)
    doc = Document([["e0", "e1"], ["e2", "e0"]])
    freq = uniform_freq(t)
    _, weights = document_words(doc, t, freq)
    assert coverage_objective(np.eye(3), doc, freq, t) == pytest.approx(weights.sum())


def test_orthogonal_facet_covers_nothing():
    t = basis_table(3)
    doc = Document([["e0", "e1"]])
    assert coverage_objective(np.eye(3)[:, 2:], doc, uniform_freq(t), t) == 0.0


def test_coverage_hand_computed():
    # words: e0, e1, e1, (e0+e1)/sqrt2 named "m"; facets e0 and (e1+e2)/sqrt2
    vecs = np.vstack([np.eye(3)[0], np.eye(3)[1], np.array([1, 1, 0]) / np.sqrt(2)])
    t = WordEmbeddingTable.from_words(["e0", "e1", "m"], vecs)
    freq = WordFrequencyTable({"e0": 1, "e1": 2, "m": 1}, 4)
    doc = Document([["e0", "e1"], ["e1", "m"]])
    facets = np.column_stack([np.eye(3)[0], np.array([0, 1, 1]) / np.sqrt(2)])
    a = 1e-4
    w = {"e0": a / (a + 0.25), "e1": a / (a + 0.5), "m": a / (a + 0.25)}
    expected = w["e0"] * 1 + 2 * w["e1"] * np.sqrt(0.5) + w["m"] * np.sqrt(0.5)
    assert coverage_objective(facets, doc, freq, t, alpha=a) == pytest.approx(expected, rel=1e-12)


def test_stop_words_excluded_from_objective():
    t = WordEmbeddingTable.from_words(["the", "e1"], np.eye(2))
    doc = Document([["the", "e1"]])
    freq = uniform_freq(t)
    words, _ = document_words(doc, t, freq)
    assert words.shape[1] == 1
    words, _ = document_words(doc, t, freq, exclude_stopwords=False)
    assert words.shape[1] == 2


def test_single_sentence_document():
    t = basis_table(3)
    s = greedy_select(Document([["e0"]]), 3, FacetSource(SENT_EMB), uniform_freq(t), t)
    assert s.order == [0]


def test_duplicate_sentence_has_zero_gain():
    t = basis_table(3)
    doc = Document([["e0"], ["e0"], ["e1"]])
    s = greedy_select(doc, 3, FacetSource(SENT_EMB), uniform_freq(t), t)
    assert s.order == [0, 2, 1]
    assert s.gains[2] == 0.0


def exhaustive_best(doc, k, source, freq, table):
    best, arg = -np.inf, None
    for combo in itertools.combinations(range(len(doc.sentences)), k):
        facets = np.hstack([sentence_facets(doc.sentences[i], source, table) for i in combo])
        val = coverage_objective(facets, doc, freq, table)
        if val > best + 1e-12:
            best, arg = val, combo
    return best, arg


def topic_document(rng, dim=8):
    """Five single-topic sentences over orthogonal topics; topics may repeat across sentences."""
    sents = []
    for _ in range(5):
        topic = int(rng.integers(dim))
        sents.append([f"e{topic}"] * int(rng.integers(1, 4)))
    return Document(sents)


def test_greedy_matches_exhaustive_on_topic_documents():
    t = basis_table(8)
    freq = uniform_freq(t)
    src = FacetSource(CODEBOOK, AxisModel(8))
    rng = np.random.default_rng(0)
    for _ in range(10):
        doc = topic_document(rng)
        s = greedy_select(doc, 3, src, freq, t)
        best, _ = exhaustive_best(doc, 3, src, freq, t)
        assert s.objective == pytest.approx(best, abs=1e-12)


def test_gains_sum_to_objective_and_nonnegative():
    t = basis_table(8)
    rng = np.random.default_rng(1)
    doc = topic_document(rng)
    s = greedy_select(doc, 5, FacetSource(CODEBOOK, AxisModel(8)), uniform_freq(t), t)
    assert all(g >= 0 for g in s.gains)
    assert sum(s.gains) == pytest.approx(s.objective, abs=1e-12)


def test_k_larger_than_document():
    t = basis_table(3)
    s = greedy_select(Document([["e0"], ["e1"]]), 5, FacetSource(SENT_EMB), uniform_freq(t), t)
    assert sorted(s.order) == [0, 1]
    with pytest.raises(ConfigError):
        greedy_select(Document([["e0"]]), 0, FacetSource(SENT_EMB), uniform_freq(t), t)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_selection_invariant_to_weight_scaling(seed, c):
    rng = np.random.default_rng(seed)
    words = rng.standard_normal((5, 12))
    words /= np.linalg.norm(words, axis=0)
    weights = rng.uniform(0.1, 1.0, 12)
    facets = [rng.standard_normal((5, int(rng.integers(1, 4)))) for _ in range(6)]
    facets = [f / np.linalg.norm(f, axis=0) for f in facets]
    a = greedy_cover(facets, words, weights, 3)
    b = greedy_cover(facets, words, c * weights, 3)
    assert a.order == b.order


def test_length_normalisation_with_unit_lengths_matches_plain():
    rng = np.random.default_rng(3)
    words = rng.standard_normal((4, 10))
    words /= np.linalg.norm(words, axis=0)
    facets = [rng.standard_normal((4, 1)) for _ in range(5)]
    facets = [f / np.linalg.norm(f) for f in facets]
    w = rng.uniform(size=10)
    assert greedy_cover(facets, words, w, 3, [1] * 5).order == greedy_cover(facets, words, w, 3).order


def test_length_normalisation_prefers_short_sentences():
    t = basis_table(3)
    doc = Document([["e0", "e1", "e2"], ["e0"], ["e1"]])
    freq = uniform_freq(t)
    plain = greedy_select(doc, 1, FacetSource(SENT_EMB), freq, t)
    normed = greedy_select(doc, 1, FacetSource(W_EMB), freq, t)
    assert plain.order == [0] and normed.order == [1]


def test_read_documents(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps({"sentences": ["a b", "c"], "reference": "a c"}) + "\n\n"
                 + json.dumps({"sentences": ["d"]}) + "\n")
    docs = read_documents(p)
    assert docs[0].sentences == [["a", "b"], ["c"]] and docs[0].reference == ["a", "c"]
    assert docs[1].reference is None
    p.write_text(json.dumps({"sentences": []}) + "\n")
    with pytest.raises(CorpusError):
        read_documents(p)
