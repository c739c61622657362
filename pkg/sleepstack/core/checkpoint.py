"""
Model checkpoints

Little-endian layout: 8-byte magic, u32 version, 32-byte architecture
fingerprint, u32 + metadata JSON, u32 tensor count, then per tensor
(u16 + name, u8 ndim, u32 per dimension, raw float64 data), and a trailing
CRC-32 of everything before it.
"""

import json
import logging
import struct
import zlib
from typing import Any, Dict, Optional

import numpy as np

from .errors import CorruptCheckpoint, FingerprintMismatch, UsageError
from .resnet import ArchitectureSpec, Model, build_model

logger = logging.getLogger(__name__)

MAGIC = b"SLPCKPT\x00"
VERSION = 1


def save_checkpoint(model: Model, path: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    """Write every model tensor plus training metadata (seed, epoch, lr, ...)"""
    meta = dict(model.training_metadata)
    meta.update(metadata or {})
    meta["num_classes"] = model.num_classes
    meta["architecture"] = model.spec.to_csv_text()
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")

    tensors = model.tensors()
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        model.spec.fingerprint(),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
        struct.pack("<I", len(tensors)),
    ]
    for name, tensor in tensors.items():
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    body = b"".join(parts)

    try:
        with open(path, "wb") as f:
            f.write(body)
            f.write(struct.pack("<I", zlib.crc32(body)))
    except OSError as e:
        raise UsageError(f"Cannot write checkpoint {path}: {e}")
    logger.info(f"Saved checkpoint with {len(tensors)} tensors to {path}")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint("Checkpoint ends early")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_checkpoint(path: str):
    """Decode a checkpoint into (fingerprint, metadata, tensors) after checking its CRC"""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise UsageError(f"Cannot read checkpoint {path}: {e}")

    if len(data) < len(MAGIC) + 4 + 32 + 4 or data[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpoint(f"{path} is not a checkpoint")
    body, trailer = data[:-4], data[-4:]
    if struct.unpack("<I", trailer)[0] != zlib.crc32(body):
        raise CorruptCheckpoint(f"{path}: CRC mismatch")

    reader = _Reader(body)
    reader.take(len(MAGIC))
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported checkpoint version {version}")
    fingerprint = reader.take(32)
    (meta_len,) = reader.unpack("<I")
    try:
        metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpoint(f"{path}: unreadable metadata: {e}")

    (count,) = reader.unpack("<I")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(reader.take(size * 8), dtype="<f8").reshape(shape).copy()
    if reader.pos != len(body):
        raise CorruptCheckpoint(f"{path}: trailing bytes after the last tensor")
    return fingerprint, metadata, tensors


def load_checkpoint(path: str, num_classes: Optional[int] = None) -> Model:
    """
    Rebuild a model from a checkpoint

    Args:
        path: Checkpoint file
        num_classes: Class count the caller expects; a checkpoint built for
            another count is rejected

    Returns:
        The model with every tensor restored bit-exactly
    """
    fingerprint, metadata, tensors = read_checkpoint(path)
    spec = ArchitectureSpec.from_csv_text(metadata["architecture"])
    if spec.fingerprint() != fingerprint:
        raise CorruptCheckpoint(f"{path}: architecture does not match its fingerprint")
    if num_classes is not None:
        if spec.with_classes(num_classes).fingerprint() != fingerprint:
            raise FingerprintMismatch(
                f"{path} was built for {metadata.get('num_classes')} classes, "
                f"this run uses {num_classes}"
            )

    model = build_model(
        spec.num_classes,
        np.random.default_rng(0),
        spec=spec,
        keep_prob=metadata.get("keep_prob", 0.5),
        bn_epsilon=metadata.get("bn_epsilon", 1e-5),
        bn_momentum=metadata.get("bn_momentum", 0.99),
    )
    targets = model.tensors()
    if set(targets) != set(tensors):
        raise CorruptCheckpoint(f"{path}: tensor names do not match the architecture")
    for name, value in tensors.items():
        if targets[name].shape != value.shape:
            raise CorruptCheckpoint(f"{path}: {name} has shape {value.shape}")
        targets[name][...] = value

    model.training_metadata = {
        k: v for k, v in metadata.items() if k not in ("architecture", "num_classes")
    }
    logger.debug(f"Loaded checkpoint {path} ({spec.num_classes} classes)")
    return model
