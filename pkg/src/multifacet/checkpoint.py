"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic        8 bytes  b"MFACETCK"
    version      uint32
    config_len   uint32, then config_len bytes of UTF-8 "key=value" lines
    n_tensors    uint32
    per tensor:  uint16 name_len, name, uint8 rank, rank x uint32 dims,
                 prod(dims) float32 values
    crc32        uint32 over every preceding byte

The vocabulary travels in the config record as a space-joined ``vocab`` line
(embedding tokens never contain whitespace).
"""

import struct
import zlib
from typing import Dict, Optional

import numpy as np

from .errors import CheckpointError, CheckpointVersionError, ChecksumError, ConfigError
from .facet_model import FacetModel, ModelConfig, parameter_shapes

MAGIC = b"MFACETCK"
FORMAT_VERSION = 1


def _config_text(model: FacetModel, extra: Optional[Dict[str, str]] = None) -> bytes:
    record = model.config.to_record()
    record["dtype"] = "float32"
    if extra:
        record.update({k: str(v) for k, v in extra.items()})
    lines = [f"{k}={record[k]}" for k in sorted(record)]
    lines.append("vocab=" + " ".join(model.vocab))
    return ("\n".join(lines)).encode("utf-8")


def save_checkpoint(model: FacetModel, path, extra: Optional[Dict[str, str]] = None):
    """Write ``model``; parameters are stored as float32."""
    out = bytearray(MAGIC)
    out += struct.pack("<I", FORMAT_VERSION)
    cfg = _config_text(model, extra)
    out += struct.pack("<I", len(cfg)) + cfg
    names = [name for name, _ in parameter_shapes(model.config, len(model.vocab))]
    out += struct.pack("<I", len(names))
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += arr.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(out))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointError("unexpected end of checkpoint data")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path):
    """Return ``(config_record, tensors)`` after validating magic, CRC and version."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 8:
        raise ChecksumError(f"{path}: file too short to be a checkpoint")
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError(f"{path}: CRC32 mismatch (truncated or corrupted file)")
    r = _Reader(body)
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (clen,) = r.unpack("<I")
    record = {}
    for line in r.take(clen).decode("utf-8").split("\n"):
        key, _, value = line.partition("=")
        record[key] = value
    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I") if rank else ()
        n = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(dims).astype(np.float32)
    if r.pos != len(body):
        raise CheckpointError(f"{path}: trailing bytes after tensor table")
    return record, tensors


def load_checkpoint(path, expected_k: Optional[int] = None,
                    expected_dim: Optional[int] = None) -> FacetModel:
    record, tensors = read_checkpoint(path)
    vocab_line = record.pop("vocab", "")
    vocab = vocab_line.split(" ") if vocab_line else []
    cfg = ModelConfig.from_record(record)
    if expected_k is not None and cfg.K != expected_k:
        raise ConfigError(f"checkpoint has K={cfg.K}, requested K={expected_k}")
    if expected_dim is not None and cfg.dim != expected_dim:
        raise ConfigError(f"checkpoint has dim={cfg.dim}, requested dim={expected_dim}")
    return FacetModel(cfg, vocab, tensors)


def checkpoint_metadata(path) -> Dict[str, str]:
    record, _ = read_checkpoint(path)
    record.pop("vocab", None)
    return record
