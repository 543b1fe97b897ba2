"""Multi-facet codebook embeddings for phrases and sentences."""

__version__ = "0.1.0"

from .embeddings import (WeightingConfig, WordEmbeddingTable, WordFrequencyTable, is_stopword,
                         load_embeddings, lookup_matrix, normalize_rows, sif_weight)
from .estimators import FacetEmbedder, NonNegativeSparseCoder, SIFEmbedder
from .facet_model import FacetModel, ModelConfig, init_model, normalize_codebook
from .nnsc import (SolverConfig, contrastive_loss, er, kmeans_assign, loss_gradient_wrt_codebook,
                   reconstruction_error, solve_coefficients)
from .training import TrainConfig, TrainingInstance, extract_instances, train, train_step

__all__ = [
    "FacetEmbedder", "FacetModel", "ModelConfig", "NonNegativeSparseCoder", "SIFEmbedder",
    "SolverConfig", "TrainConfig", "TrainingInstance", "WeightingConfig", "WordEmbeddingTable",
    "WordFrequencyTable", "contrastive_loss", "er", "extract_instances", "init_model",
    "is_stopword", "kmeans_assign", "load_embeddings", "lookup_matrix",
    "loss_gradient_wrt_codebook", "normalize_codebook", "normalize_rows",
    "reconstruction_error", "sif_weight", "solve_coefficients", "train", "train_step",
]
