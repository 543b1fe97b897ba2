"""Corpus ingestion, training instances and the alternating training loop."""

import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import nnsc
from .checkpoint import save_checkpoint
from .embeddings import WordEmbeddingTable, WordFrequencyTable, is_stopword, lookup_matrix
from .errors import ConfigError, CorpusError, TrainingError
from .facet_model import FacetModel, ModelConfig

logger = logging.getLogger(__name__)

SENTENCE = "sentence"
PHRASE = "phrase"


@dataclass
class TrainingInstance:
    tokens: List[str]
    cooc: List[str]


@dataclass
class TrainConfig:
    mode: str = SENTENCE
    window: int = 5
    max_seq_len: int = 50
    max_cooc: int = 30
    min_word_count: int = 100
    learning_rate: float = 0.1
    grad_clip_norm: float = 1.0
    epochs: int = 1
    batch_size: int = 1
    seed: int = 0
    threads: int = 1
    solver: nnsc.SolverConfig = field(default_factory=nnsc.SolverConfig)
    model: Optional[ModelConfig] = None

    def __post_init__(self):
        if self.mode not in (SENTENCE, PHRASE):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for name in ("window", "max_seq_len", "max_cooc", "batch_size", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.min_word_count < 0 or self.epochs < 0:
            raise ConfigError("min_word_count and epochs must be nonnegative")
        if self.learning_rate < 0 or self.grad_clip_norm <= 0:
            raise ConfigError("learning_rate must be >= 0 and grad_clip_norm > 0")
        if self.model is None:
            self.model = ModelConfig.for_mode(self.mode)
        if self.mode == PHRASE and self.model.cross_attention:
            raise ConfigError("phrase mode requires cross_attention=False")
        if self.model.max_len < self.max_seq_len:
            raise ConfigError("model.max_len must cover max_seq_len")


# -- corpus reading ----------------------------------------------------------

def read_corpus(lines: Iterable[str]) -> List[List[List[str]]]:
    """One sentence per line, blank lines separate documents."""
    docs, cur = [], []
    for line in lines:
        toks = line.split()
        if not toks:
            if cur:
                docs.append(cur)
                cur = []
            continue
        cur.append(toks)
    if cur:
        docs.append(cur)
    return docs


def read_corpus_file(path) -> List[List[List[str]]]:
    with open(path, encoding="utf-8") as fh:
        return read_corpus(fh)


_BRACKETS = re.compile(r"(\[\[|\]\])")


def parse_phrase_line(tokens: Sequence[str]) -> Tuple[List[str], List[Tuple[int, int]]]:
    """Strip ``[[ ... ]]`` markup; returns plain tokens and ``[start, end)`` spans."""
    plain: List[str] = []
    spans = []
    start = None
    for raw in tokens:
        for piece in _BRACKETS.split(raw):
            if piece == "":
                continue
            if piece == "[[":
                if start is not None:
                    raise CorpusError("nested '[[' in phrase markup")
                start = len(plain)
            elif piece == "]]":
                if start is None:
                    raise CorpusError("']]' without matching '[['")
                if start == len(plain):
                    raise CorpusError("empty phrase '[[ ]]'")
                spans.append((start, len(plain)))
                start = None
            else:
                plain.append(piece)
    if start is not None:
        raise CorpusError("unterminated '[[' in phrase markup")
    return plain, spans


def _clean_cooc(words, table, cfg, rng):
    out, seen = [], set()
    for w in words:
        if is_stopword(w) or w not in table:
            continue
        key = table.key(w)
        if key in seen:
            continue
        seen.add(key)
        out.append(w)
    if len(out) > cfg.max_cooc:
        keep = np.sort(rng.choice(len(out), size=cfg.max_cooc, replace=False))
        out = [out[i] for i in keep]
    return out


def extract_instances(corpus: Sequence[Sequence[Sequence[str]]], cfg: TrainConfig,
                      table: WordEmbeddingTable, rng=None) -> List[TrainingInstance]:
    """Build ``(sequence, co-occurring words)`` pairs.

    Sentence mode: the co-occurring words of sentence ``t`` are the words of
    sentences ``t-1`` and ``t+1`` in the same document. Phrase mode: each
    ``[[ ... ]]`` span of a line, with ``window`` words on either side.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    out = []
    for doc in corpus:
        if cfg.mode == SENTENCE:
            for t, sent in enumerate(doc):
                if len(sent) > cfg.max_seq_len:
                    continue
                ctx = list(doc[t - 1]) if t > 0 else []
                if t + 1 < len(doc):
                    ctx += list(doc[t + 1])
                cooc = _clean_cooc(ctx, table, cfg, rng)
                if cooc:
                    out.append(TrainingInstance(list(sent), cooc))
        else:
            for line in doc:
                plain, spans = parse_phrase_line(line)
                for a, b in spans:
                    if b - a > cfg.max_seq_len:
                        continue
                    ctx = plain[max(0, a - cfg.window):a] + plain[b:b + cfg.window]
                    cooc = _clean_cooc(ctx, table, cfg, rng)
                    if cooc:
                        out.append(TrainingInstance(plain[a:b], cooc))
    return out


def corpus_sentences(corpus, mode=SENTENCE):
    for doc in corpus:
        for line in doc:
            yield parse_phrase_line(line)[0] if mode == PHRASE else line


def model_vocabulary(table: WordEmbeddingTable, freq: WordFrequencyTable,
                     min_count: int) -> List[str]:
    """Embedding-table words seen at least ``min_count`` times (table order)."""
    counts: Dict[str, int] = {}
    for tok, c in freq.counts.items():
        if tok in table:
            key = table.key(tok)
            counts[key] = counts.get(key, 0) + c
    return [w for w in table.words if counts.get(w, 0) >= min_count and counts.get(w, 0) > 0]


# -- optimisation ------------------------------------------------------------

def negative_index(n: int, t: int, rng) -> int:
    """Uniform draw from ``{0..n-1} \\ {t}``."""
    if n < 2:
        raise TrainingError("negative sampling needs at least two instances")
    r = int(rng.integers(n - 1))
    return r + 1 if r >= t else r


def sample_negative(dataset: Sequence[TrainingInstance], t: int, rng) -> List[str]:
    return dataset[negative_index(len(dataset), t, rng)].cooc


@dataclass
class StepResult:
    loss: float
    er_pos: float
    er_neg: float
    grads: Dict[str, np.ndarray]


def instance_gradients(model: FacetModel, tokens, W_pos, W_neg, solver: nnsc.SolverConfig,
                       rng=None, train: bool = True) -> StepResult:
    """Forward, both inner solves, and backward with the coefficients frozen."""
    F, record = model.forward(tokens, train=train, rng=rng, return_record=True)
    F = F.astype(np.float64)
    if not np.all(np.isfinite(F)):
        raise TrainingError(f"non-finite codebook for sequence {' '.join(tokens)!r}; "
                            "parameters have diverged")
    loss, M_pos, M_neg = nnsc.contrastive_loss(F, W_pos, W_neg, solver)
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss} for sequence {' '.join(tokens)!r}; "
                            f"max |F| = {np.max(np.abs(F))}")
    er_pos = nnsc.reconstruction_error(F, W_pos, M_pos)
    er_neg = nnsc.reconstruction_error(F, W_neg, M_neg)
    dF = nnsc.loss_gradient_wrt_codebook(F, W_pos, W_neg, M_pos, M_neg)
    return StepResult(loss, er_pos, er_neg, model.backward(record, dF))


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float):
    """Rescale so the joint 2-norm is at most ``max_norm``; returns ``(grads, norm)``."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


def train_step(model: FacetModel, instance: TrainingInstance, negative: Sequence[str],
               cfg: TrainConfig, table: WordEmbeddingTable, rng=None) -> StepResult:
    """One SGD update on a single instance; mutates ``model`` in place."""
    W_pos, _ = lookup_matrix(instance.cooc, table)
    W_neg, _ = lookup_matrix(negative, table)
    res = instance_gradients(model, instance.tokens, W_pos, W_neg, cfg.solver, rng)
    grads, _ = clip_by_global_norm(res.grads, cfg.grad_clip_norm)
    model.apply_gradients(grads, cfg.learning_rate)
    return res


@dataclass
class TrainResult:
    model: FacetModel
    checkpoint: Optional[str]
    loss_log: Optional[str]
    epoch_losses: List[float]
    n_instances: int


def _average(results: List[StepResult]) -> Dict[str, np.ndarray]:
    if len(results) == 1:
        return results[0].grads
    out = {}
    for name in results[0].grads:
        acc = results[0].grads[name].copy()
        for r in results[1:]:
            acc += r.grads[name]
        out[name] = acc / len(results)
    return out


def train(corpus, cfg: TrainConfig, table: WordEmbeddingTable, out_dir=None,
          freq: Optional[WordFrequencyTable] = None, model: Optional[FacetModel] = None
          ) -> TrainResult:
    """Shuffled-epoch SGD over the extracted instances.

    Writes ``loss.tsv`` (one row per instance step), ``checkpoint-epochN.bin``
    at the end of every epoch and ``model.bin`` (the final parameters) when
    ``out_dir`` is given.
    """
    rng = np.random.default_rng(cfg.seed)
    instances = extract_instances(corpus, cfg, table, rng)
    if len(instances) < 2:
        raise CorpusError(f"need at least two usable training instances, found {len(instances)}")
    if model is None:
        model_cfg = cfg.model
        if table.lowercase and not model_cfg.lowercase:
            model_cfg = replace(model_cfg, lowercase=True)
        if freq is None:
            freq = WordFrequencyTable.from_corpus(corpus_sentences(corpus, cfg.mode))
        vocab = model_vocabulary(table, freq, cfg.min_word_count)
        model = FacetModel.init(model_cfg, table, seed=cfg.seed, vocab=vocab)
    targets = [lookup_matrix(inst.cooc, table)[0] for inst in instances]
    n = len(instances)

    log_path = ckpt_path = None
    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, "loss.tsv")
        log_fh = open(log_path, "w", encoding="utf-8")
        log_fh.write("step\tloss\ter_pos\ter_neg\n")
    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    extra = {"mode": cfg.mode}
    epoch_losses = []
    step = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for b in range(0, n, cfg.batch_size):
                batch = order[b:b + cfg.batch_size]
                jobs = []
                for t in batch:
                    r = negative_index(n, int(t), rng)
                    seed = int(rng.integers(2 ** 63 - 1))
                    jobs.append((int(t), r, seed))

                def run(job):
                    t, r, seed = job
                    return instance_gradients(model, instances[t].tokens, targets[t], targets[r],
                                              cfg.solver, np.random.default_rng(seed))

                results = list(pool.map(run, jobs)) if pool else [run(j) for j in jobs]
                grads, _ = clip_by_global_norm(_average(results), cfg.grad_clip_norm)
                model.apply_gradients(grads, cfg.learning_rate)
                for res in results:
                    step += 1
                    total += res.loss
                    if log_fh:
                        log_fh.write(f"{step}\t{res.loss:.9g}\t{res.er_pos:.9g}\t{res.er_neg:.9g}\n")
            epoch_losses.append(total / n)
            logger.info("epoch %d: mean loss %.6f", epoch, total / n)
            if out_dir is not None:
                save_checkpoint(model, os.path.join(out_dir, f"checkpoint-epoch{epoch}.bin"), extra)
        if out_dir is not None:
            ckpt_path = os.path.join(out_dir, "model.bin")
            save_checkpoint(model, ckpt_path, extra)
    finally:
        if log_fh:
            log_fh.close()
        if pool:
            pool.shutdown()
    return TrainResult(model, ckpt_path, log_path, epoch_losses, n)
