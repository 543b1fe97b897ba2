"""Sequence-to-codebook network.

A Transformer encoder reads ``tokens + <eos>``; ``K`` linear heads map the
contextual ``<eos>`` state to ``K`` decoder slots; a non-autoregressive
Transformer decoder lets the slots attend to each other (and, in sentence
mode, to the encoder states) and a final projection yields the ``|E| x K``
codebook matrix.
"""

from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import layers
from .errors import ConfigError, ShapeError, StaleRecordError

UNK = "<unk>"
EOS = "<eos>"


@dataclass
class ModelConfig:
    dim: int = 300
    K: int = 10
    enc_layers: int = 3
    dec_layers: int = 5
    heads: int = 4
    ff_dim: Optional[int] = None
    attn_dropout: float = 0.1
    cross_attention: bool = True
    max_len: int = 50
    seed: int = 0
    dtype: str = "float32"
    lowercase: bool = False

    def __post_init__(self):
        if self.ff_dim is None:
            self.ff_dim = 4 * self.dim
        if self.dim < 1 or self.K < 1 or self.max_len < 1:
            raise ConfigError("dim, K and max_len must be positive")
        if self.dim % self.heads:
            raise ConfigError(f"dim={self.dim} is not divisible by heads={self.heads}")
        if self.enc_layers < 1 or self.dec_layers < 1:
            raise ConfigError("need at least one encoder and one decoder layer")
        if not 0.0 <= self.attn_dropout < 1.0:
            raise ConfigError("attn_dropout must lie in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unsupported dtype {self.dtype!r}")

    @classmethod
    def for_mode(cls, mode: str, dim: int = 300, K: int = 10, **overrides):
        """Defaults for ``sentence`` or ``phrase`` training."""
        if mode == "sentence":
            base = dict(dec_layers=1 if K == 1 else 5, attn_dropout=0.1, cross_attention=True)
        elif mode == "phrase":
            base = dict(dec_layers=2, attn_dropout=0.5, cross_attention=False)
        else:
            raise ConfigError(f"unknown mode {mode!r}")
        base.update(overrides)
        return cls(dim=dim, K=K, **base)

    def to_record(self) -> Dict[str, str]:
        return {k: str(v) for k, v in asdict(self).items()}

    @classmethod
    def from_record(cls, record: Dict[str, str]) -> "ModelConfig":
        kwargs = {}
        for f in fields(cls):
            if f.name not in record:
                raise ConfigError(f"config record lacks {f.name!r}")
            raw = record[f.name]
            if f.name in ("cross_attention", "lowercase"):
                kwargs[f.name] = raw == "True"
            elif f.name == "dtype":
                kwargs[f.name] = raw
            elif f.name == "attn_dropout":
                kwargs[f.name] = float(raw)
            else:
                kwargs[f.name] = int(raw)
        return cls(**kwargs)


def _attention_shapes(prefix, d):
    for part in ("q", "k", "v", "o"):
        yield f"{prefix}.{part}.weight", (d, d)
        yield f"{prefix}.{part}.bias", (d,)


def _ffn_shapes(prefix, d, ff):
    yield f"{prefix}.in.weight", (d, ff)
    yield f"{prefix}.in.bias", (ff,)
    yield f"{prefix}.out.weight", (ff, d)
    yield f"{prefix}.out.bias", (d,)


def _ln_shapes(prefix, d):
    yield f"{prefix}.gain", (d,)
    yield f"{prefix}.bias", (d,)


def parameter_shapes(cfg: ModelConfig, n_vocab: int):
    """Ordered ``(name, shape)`` pairs; the order fixes initialisation."""
    d, ff = cfg.dim, cfg.ff_dim
    yield "tokens", (n_vocab + 2, d)
    yield "positions", (cfg.max_len + 1, d)
    for i in range(cfg.enc_layers):
        p = f"enc.{i}"
        yield from _attention_shapes(p + ".attn", d)
        yield from _ln_shapes(p + ".ln1", d)
        yield from _ffn_shapes(p + ".ffn", d, ff)
        yield from _ln_shapes(p + ".ln2", d)
    yield "heads.weight", (cfg.K, d, d)
    yield "heads.bias", (cfg.K, d)
    for i in range(cfg.dec_layers):
        p = f"dec.{i}"
        yield from _attention_shapes(p + ".self", d)
        yield from _ln_shapes(p + ".ln1", d)
        if cfg.cross_attention:
            yield from _attention_shapes(p + ".cross", d)
            yield from _ln_shapes(p + ".ln2", d)
        yield from _ffn_shapes(p + ".ffn", d, ff)
        yield from _ln_shapes(p + ".ln3", d)
    yield "proj.weight", (d, d)
    yield "proj.bias", (d,)


def _init_param(name, shape, rng, d):
    if name.endswith(".gain"):
        return np.ones(shape)
    if name.endswith(".bias"):
        return np.zeros(shape)
    if name in ("tokens", "positions"):
        a = np.sqrt(3.0 / d)
        return rng.uniform(-a, a, size=shape)
    fan_in, fan_out = shape[-2], shape[-1]
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


class ForwardRecord:
    """Activations of one recorded forward pass, consumed by ``backward``."""

    def __init__(self, ids, version, caches):
        self.ids = ids
        self.version = version
        self.caches = caches


class FacetModel:
    def __init__(self, config: ModelConfig, vocab: Sequence[str], params: Dict[str, np.ndarray]):
        self.config = config
        self.vocab = list(vocab)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.unk_id = len(self.vocab)
        self.eos_id = len(self.vocab) + 1
        dtype = np.dtype(config.dtype)
        expected = dict(parameter_shapes(config, len(self.vocab)))
        if set(expected) != set(params):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise ShapeError(f"parameter set mismatch; missing={missing[:5]} extra={extra[:5]}")
        self.params = {}
        for name, shape in expected.items():
            arr = np.ascontiguousarray(params[name], dtype=dtype)
            if arr.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
            self.params[name] = arr
        self.version = 0

    @classmethod
    def init(cls, cfg: ModelConfig, table, seed: Optional[int] = None,
             vocab: Optional[Sequence[str]] = None) -> "FacetModel":
        """Seeded initialisation; token rows are copied from ``table``."""
        if table.dim != cfg.dim:
            raise ConfigError(f"embedding dim {table.dim} != model dim {cfg.dim}")
        if vocab is None:
            vocab = table.words
        vocab = [w for w in vocab if w in table]
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        params = {}
        for name, shape in parameter_shapes(cfg, len(vocab)):
            params[name] = _init_param(name, shape, rng, cfg.dim)
        for i, w in enumerate(vocab):
            params["tokens"][i] = table.vector(w)
        return cls(cfg, vocab, params)

    def copy(self) -> "FacetModel":
        out = FacetModel(self.config, self.vocab, {k: v.copy() for k, v in self.params.items()})
        out.version = self.version
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        if len(tokens) == 0:
            raise ShapeError("empty input sequence")
        if len(tokens) > self.config.max_len:
            raise ShapeError(f"sequence length {len(tokens)} exceeds max_len={self.config.max_len}")
        if self.config.lowercase:
            tokens = [t.lower() for t in tokens]
        ids = [self.index.get(t, self.unk_id) for t in tokens]
        return np.array(ids + [self.eos_id], dtype=np.int64)

    # -- forward ---------------------------------------------------------

    def _encode(self, ids, train, rng):
        P, cfg = self.params, self.config
        drop = cfg.attn_dropout if train else 0.0
        x = P["tokens"][ids] + P["positions"][: len(ids)]
        caches = []
        for i in range(cfg.enc_layers):
            x, c = layers.encoder_block_forward(x, P, f"enc.{i}", cfg.heads, drop, rng)
            caches.append(c)
        return x, caches

    def _decode(self, e_eos, memory, train, rng):
        P, cfg = self.params, self.config
        drop = cfg.attn_dropout if train else 0.0
        slots = np.einsum("d,kde->ke", e_eos, P["heads.weight"]) + P["heads.bias"]
        y = slots
        caches = []
        for i in range(cfg.dec_layers):
            y, c = layers.decoder_block_forward(y, memory, P, f"dec.{i}", cfg.heads, drop, rng,
                                                cfg.cross_attention)
            caches.append(c)
        out, cp = layers.linear_forward(y, P, "proj")
        return out.T, (caches, cp)

    def encode(self, tokens: Sequence[str], train: bool = False, rng=None) -> np.ndarray:
        """Contextual states for every token plus the trailing ``<eos>``."""
        enc, _ = self._encode(self.token_ids(tokens), train, rng)
        return enc

    def decode(self, e_eos: np.ndarray, memory: np.ndarray, train: bool = False, rng=None):
        F, _ = self._decode(np.asarray(e_eos, dtype=self.config.dtype),
                            np.asarray(memory, dtype=self.config.dtype), train, rng)
        return F

    def forward(self, tokens: Sequence[str], train: bool = False, rng=None,
                return_record: bool = False):
        """Unnormalised codebook ``F`` of shape ``(dim, K)``.

        ``train=True`` enables attention dropout drawn from ``rng``. With
        ``return_record`` the activations needed by :meth:`backward` are
        returned alongside ``F``.
        """
        if train and rng is None:
            rng = np.random.default_rng()
        ids = self.token_ids(tokens)
        enc, enc_caches = self._encode(ids, train, rng)
        F, dec_caches = self._decode(enc[-1], enc, train, rng)
        if not return_record:
            return F
        return F, ForwardRecord(ids, self.version, (enc, enc_caches, dec_caches))

    def codebook(self, tokens: Sequence[str]) -> np.ndarray:
        """Eval-mode codebook with unit-norm columns, in float64."""
        return normalize_codebook(self.forward(tokens).astype(np.float64))

    # -- backward --------------------------------------------------------

    def backward(self, record: ForwardRecord, upstream: np.ndarray) -> Dict[str, np.ndarray]:
        """Parameter gradients given ``dLoss/dF`` for a recorded forward."""
        if record is None or not isinstance(record, ForwardRecord):
            raise StaleRecordError("backward needs the record returned by forward(return_record=True)")
        if record.version != self.version:
            raise StaleRecordError("parameters changed since the forward pass was recorded")
        P, cfg = self.params, self.config
        dtype = np.dtype(cfg.dtype)
        upstream = np.asarray(upstream, dtype=dtype)
        enc, enc_caches, (dec_caches, cp) = record.caches
        if upstream.shape != (cfg.dim, cfg.K):
            raise ShapeError(f"upstream must have shape {(cfg.dim, cfg.K)}, got {upstream.shape}")
        grads: Dict[str, np.ndarray] = {}
        dy = layers.linear_backward(upstream.T, cp, P, "proj", grads)
        denc = np.zeros_like(enc)
        for i in reversed(range(cfg.dec_layers)):
            dy, dmem = layers.decoder_block_backward(dy, dec_caches[i], P, f"dec.{i}", cfg.heads,
                                                     grads, cfg.cross_attention)
            if dmem is not None:
                denc += dmem
        e_eos = enc[-1]
        grads["heads.weight"] = np.einsum("d,ke->kde", e_eos, dy)
        grads["heads.bias"] = dy.copy()
        denc[-1] += np.einsum("kde,ke->d", P["heads.weight"], dy)
        dx = denc
        for i in reversed(range(cfg.enc_layers)):
            dx = layers.encoder_block_backward(dx, enc_caches[i], P, f"enc.{i}", cfg.heads, grads)
        T = len(record.ids)
        dpos = np.zeros_like(P["positions"])
        dpos[:T] = dx
        grads["positions"] = dpos
        dtok = np.zeros_like(P["tokens"])
        np.add.at(dtok, record.ids, dx)
        grads["tokens"] = dtok
        for name, p in P.items():
            if name not in grads:
                grads[name] = np.zeros_like(p)
        return grads

    def apply_gradients(self, grads: Dict[str, np.ndarray], learning_rate: float):
        """Plain SGD step; invalidates outstanding forward records."""
        for name, g in grads.items():
            self.params[name] -= np.asarray(learning_rate * g, dtype=self.params[name].dtype)
        self.version += 1


def normalize_codebook(F: np.ndarray) -> np.ndarray:
    """Divide every column by its 2-norm."""
    F = np.asarray(F, dtype=np.float64)
    norms = np.linalg.norm(F, axis=0)
    if np.any(norms == 0):
        raise ShapeError("codebook has a zero column")
    return F / norms


def init_model(cfg: ModelConfig, table, rng_seed: Optional[int] = None,
               vocab: Optional[List[str]] = None) -> FacetModel:
    return FacetModel.init(cfg, table, rng_seed, vocab)
