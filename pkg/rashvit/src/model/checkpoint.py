"""
Checkpoint Format

Byte layout:
    8 bytes   magic "RASHVIT1"
    4 bytes   little-endian uint32 header length
    N bytes   UTF-8 JSON header (sorted keys, compact separators)
    ...       little-endian row-major float32 blobs, in header order

Header:
    {
      "config":   ModelConfig as JSON,
      "metadata": free-form run metadata (epoch, val accuracy, ...),
      "tensors":  [{"name", "kind": "param"|"buffer", "dtype": "f32", "shape", "offset", "nbytes"}]
    }

Offsets are relative to the first byte after the header. Serializing a
loaded checkpoint reproduces the file byte for byte.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from rashvit.src.errors import CheckpointFormatError, MissingFileError
from rashvit.src.model.config import ModelConfig
from rashvit.src.model.network import RAShViTNet
from rashvit.src.utils.io import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"RASHVIT1"
_LENGTH = struct.Struct("<I")
_BLOB_DTYPE = np.dtype("<f4")


@dataclass
class Checkpoint:
    """Decoded checkpoint: config, named tensors and metadata."""
    config: ModelConfig
    tensors: Dict[str, Tuple[str, np.ndarray]] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: RAShViTNet, metadata: Dict[str, Any] = None) -> "Checkpoint":
        tensors = {name: ("param", t.data.astype(np.float32)) for name, t in model.named_parameters()}
        tensors.update({name: ("buffer", array.astype(np.float32)) for name, array in model.named_buffers()})
        return cls(model.cfg, tensors, dict(metadata or {}))

    def to_bytes(self) -> bytes:
        entries = []
        blobs = []
        offset = 0
        for name, (kind, array) in self.tensors.items():
            blob = np.ascontiguousarray(array, dtype=_BLOB_DTYPE).tobytes()
            entries.append({
                "name": name,
                "kind": kind,
                "dtype": "f32",
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(blob),
            })
            blobs.append(blob)
            offset += len(blob)
        header = {
            "config": self.config.model_dump(mode="json"),
            "metadata": self.metadata,
            "tensors": entries,
        }
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return MAGIC + _LENGTH.pack(len(encoded)) + encoded + b"".join(blobs)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Checkpoint":
        if len(blob) < len(MAGIC) + _LENGTH.size or blob[:len(MAGIC)] != MAGIC:
            raise CheckpointFormatError("not a checkpoint: bad magic bytes")
        (header_len,) = _LENGTH.unpack_from(blob, len(MAGIC))
        start = len(MAGIC) + _LENGTH.size
        try:
            header = json.loads(blob[start:start + header_len].decode("utf-8"))
            cfg = ModelConfig.model_validate(header["config"])
            entries = header["tensors"]
        except (ValueError, KeyError) as e:
            raise CheckpointFormatError(f"corrupt checkpoint header: {e}") from e

        data_start = start + header_len
        tensors: Dict[str, Tuple[str, np.ndarray]] = {}
        for entry in entries:
            if entry.get("dtype") != "f32":
                raise CheckpointFormatError(f"unsupported dtype {entry.get('dtype')!r} for {entry['name']}")
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            lo = data_start + entry["offset"]
            hi = lo + count * _BLOB_DTYPE.itemsize
            if hi > len(blob):
                raise CheckpointFormatError(f"truncated checkpoint: tensor {entry['name']} runs past end of file")
            array = np.frombuffer(blob, dtype=_BLOB_DTYPE, count=count, offset=lo).reshape(shape)
            tensors[entry["name"]] = (entry["kind"], array.astype(np.float32))
        return cls(cfg, tensors, header.get("metadata", {}))


def save_checkpoint(path: Union[str, Path], model: RAShViTNet, metadata: Dict[str, Any] = None) -> Path:
    """Write `model` atomically to `path`."""
    path = Path(path)
    atomic_write_bytes(path, Checkpoint.from_model(model, metadata).to_bytes())
    logger.info(f"Saved checkpoint {path} ({model.num_parameters():,} parameters)")
    return path


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"checkpoint not found: {path}")
    return Checkpoint.from_bytes(path.read_bytes())


def restore(model: RAShViTNet, checkpoint: Checkpoint) -> RAShViTNet:
    """
    Copy checkpoint tensors into `model` in place.

    Raises:
        CheckpointFormatError: If names or shapes differ from the model's
    """
    params = model.parameters()
    buffers = model.buffers()
    expected = set(params) | set(buffers)
    found = set(checkpoint.tensors)
    if expected != found:
        missing = sorted(expected - found)[:5]
        extra = sorted(found - expected)[:5]
        raise CheckpointFormatError(f"tensor names differ from model (missing {missing}, unexpected {extra})")

    for name, (kind, array) in checkpoint.tensors.items():
        target = params[name].data if name in params else buffers[name]
        if target.shape != array.shape:
            raise CheckpointFormatError(f"{name}: shape {array.shape} != model {target.shape}")
        target[...] = array
    return model


def load_model(path: Union[str, Path], dtype=np.float32) -> Tuple[RAShViTNet, Dict[str, Any]]:
    """Rebuild the network described by a checkpoint and load its tensors."""
    checkpoint = read_checkpoint(path)
    model = RAShViTNet(checkpoint.config, seed=0, dtype=dtype)
    restore(model, checkpoint)
    return model, checkpoint.metadata
