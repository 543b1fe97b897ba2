"""scikit-learn style wrappers around the library functions."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import nnsc, scoring
from ._validation import check_corpus, check_sequences
from .checkpoint import load_checkpoint, save_checkpoint
from .embeddings import DEFAULT_ALPHA, WordFrequencyTable
from .facet_model import ModelConfig
from .training import TrainConfig, train


class FacetEmbedder(TransformerMixin, BaseEstimator):
    """Learn to map word sequences to ``n_facets`` codebook embeddings.

    ``fit`` takes a corpus (list of documents, each a list of sentences given
    as strings or token lists); ``transform`` returns an array of shape
    ``(n_sequences, n_facets, dim)`` holding unit-norm facet vectors.

    Parameters left as ``None`` take the per-mode defaults of
    :meth:`ModelConfig.for_mode`.
    """

    def __init__(self, embeddings=None, mode="sentence", n_facets=10, sparsity=0.4,
                 epochs=1, learning_rate=0.1, grad_clip_norm=1.0, batch_size=1,
                 min_word_count=100, window=5, enc_layers=3, dec_layers=None, heads=4,
                 ff_dim=None, attn_dropout=None, max_len=50, random_state=0, n_jobs=1):
        self.embeddings = embeddings
        self.mode = mode
        self.n_facets = n_facets
        self.sparsity = sparsity
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.grad_clip_norm = grad_clip_norm
        self.batch_size = batch_size
        self.min_word_count = min_word_count
        self.window = window
        self.enc_layers = enc_layers
        self.dec_layers = dec_layers
        self.heads = heads
        self.ff_dim = ff_dim
        self.attn_dropout = attn_dropout
        self.max_len = max_len
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _train_config(self) -> TrainConfig:
        overrides = dict(enc_layers=self.enc_layers, heads=self.heads, ff_dim=self.ff_dim,
                         max_len=self.max_len, seed=self.random_state)
        if self.dec_layers is not None:
            overrides["dec_layers"] = self.dec_layers
        if self.attn_dropout is not None:
            overrides["attn_dropout"] = self.attn_dropout
        model_cfg = ModelConfig.for_mode(self.mode, self.embeddings.dim, self.n_facets, **overrides)
        return TrainConfig(mode=self.mode, window=self.window,
                           max_seq_len=min(50, self.max_len),
                           min_word_count=self.min_word_count,
                           learning_rate=self.learning_rate, grad_clip_norm=self.grad_clip_norm,
                           epochs=self.epochs, batch_size=self.batch_size,
                           seed=self.random_state, threads=self.n_jobs,
                           solver=nnsc.SolverConfig(lam=self.sparsity), model=model_cfg)

    def fit(self, X, y=None, out_dir=None):
        if self.embeddings is None:
            raise ValueError("FacetEmbedder needs a WordEmbeddingTable in `embeddings`")
        corpus = check_corpus(X)
        result = train(corpus, self._train_config(), self.embeddings, out_dir=out_dir)
        self.model_ = result.model
        self.epoch_losses_ = result.epoch_losses
        self.n_instances_ = result.n_instances
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        seqs = check_sequences(X)
        return np.stack([self.model_.codebook(s).T for s in seqs])

    def similarity(self, A, B):
        """Negative symmetric reconstruction distance for aligned pairs."""
        FA, FB = self.transform(A), self.transform(B)
        cfg = scoring.ScoreConfig(solver=nnsc.SolverConfig(lam=self.sparsity))
        return np.array([-scoring.sc_distance(a.T, b.T, cfg) for a, b in zip(FA, FB)])

    def save(self, path):
        check_is_fitted(self, "model_")
        save_checkpoint(self.model_, path, {"mode": self.mode})

    @classmethod
    def from_checkpoint(cls, path, embeddings=None, **params):
        model = load_checkpoint(path)
        est = cls(embeddings=embeddings, n_facets=model.config.K, **params)
        est.model_ = model
        return est


class SIFEmbedder(TransformerMixin, BaseEstimator):
    """Weighted-average sentence vectors, optionally with the top principal
    direction removed (fitted on the data passed to ``fit``).

    ``weighting`` is one of ``uniform``, ``prob``, ``prob_x_attention`` or
    ``attention``; the last two need ``facet_model``.
    """

    def __init__(self, embeddings=None, frequencies=None, alpha=DEFAULT_ALPHA, weighting="prob",
                 remove_pc=True, facet_model=None, random_state=0):
        self.embeddings = embeddings
        self.frequencies = frequencies
        self.alpha = alpha
        self.weighting = weighting
        self.remove_pc = remove_pc
        self.facet_model = facet_model
        self.random_state = random_state

    def _vectors(self, X):
        freq = self.frequencies
        if freq is None:
            freq = WordFrequencyTable()
        out = []
        for s in check_sequences(X):
            cb = self.facet_model.codebook(s) if self.facet_model is not None else None
            out.append(scoring.sentence_vector(s, self.embeddings, self.weighting, freq,
                                               self.alpha, cb))
        return np.vstack(out)

    def fit(self, X, y=None):
        V = self._vectors(X)
        self.component_ = (scoring.first_principal_direction(V, self.random_state)
                           if self.remove_pc else None)
        return self

    def transform(self, X):
        check_is_fitted(self, "component_")
        V = self._vectors(X)
        if self.component_ is not None:
            V = V - np.outer(V @ self.component_, self.component_)
        return V


class NonNegativeSparseCoder(TransformerMixin, BaseEstimator):
    """Box-constrained sparse codes of samples over a fixed dictionary.

    ``dictionary`` has shape ``(n_atoms, n_features)`` (rows are atoms, as
    in :class:`sklearn.decomposition.SparseCoder`); ``transform`` returns
    codes of shape ``(n_samples, n_atoms)`` with entries in ``[0, 1]``.
    """

    def __init__(self, dictionary=None, lam=0.4, mode="nnsc", max_iters=200):
        self.dictionary = dictionary
        self.lam = lam
        self.mode = mode
        self.max_iters = max_iters

    def fit(self, X=None, y=None):
        self.components_ = check_array(self.dictionary, dtype=np.float64)
        self.n_features_in_ = self.components_.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        cfg = nnsc.SolverConfig(lam=self.lam, mode=self.mode, max_iters=self.max_iters)
        return nnsc.coefficients(self.components_.T, X.T, cfg).T

    def reconstruction_error(self, X):
        codes = self.transform(X)
        return nnsc.reconstruction_error(self.components_.T, np.asarray(X, dtype=float).T, codes.T)
