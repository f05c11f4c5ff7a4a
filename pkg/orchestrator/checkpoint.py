"""
Binary checkpoint container.

Layout (little-endian):
    magic b"PPTCKPT\\0" | u32 version
    str config_hash | str config_json
    u32 count | count x (str name | u32 ndim | ndim x u64 dim)
    value blocks, float64, in table order
    u64 step | u32 count | count x (str name | m block | v block)
    32-byte sha256 of everything before it
where str is a u32 byte length followed by UTF-8.
"""

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import RunConfig, config_hash
from errors import CheckpointError
from orchestrator.model import PptModel
from orchestrator.optimizer import OptimizerState

logger = logging.getLogger(__name__)

MAGIC = b"PPTCKPT\0"
FORMAT_VERSION = 1
_DIGEST = 32


@dataclass
class CheckpointData:
    version: int
    config_hash: str
    config: Dict
    params: Dict[str, np.ndarray]
    step: int = 0
    moments: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @property
    def run_config(self) -> RunConfig:
        return RunConfig.model_validate(self.config)


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_array(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f8").tobytes()


def encode_checkpoint(model: PptModel, opt: Optional[OptimizerState] = None) -> bytes:
    cfg_json = json.dumps(model.cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    named = list(model.named_parameters())
    parts: List[bytes] = [MAGIC, struct.pack("<I", FORMAT_VERSION), _pack_str(config_hash(model.cfg)), _pack_str(cfg_json)]

    parts.append(struct.pack("<I", len(named)))
    for name, param in named:
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", param.ndim))
        parts.append(struct.pack(f"<{param.ndim}Q", *param.shape))
    parts.extend(_pack_array(param.data) for _, param in named)

    names = opt.names() if opt is not None else []
    parts.append(struct.pack("<QI", opt.step_count if opt is not None else 0, len(names)))
    for name in names:
        parts.append(_pack_str(name))
        parts.append(_pack_array(opt.m[name]))
        parts.append(_pack_array(opt.v[name]))

    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(model: PptModel, opt: Optional[OptimizerState], path: str) -> str:
    """Write the checkpoint and return its sha256 hex digest."""
    blob = encode_checkpoint(model, opt)
    with open(path, "wb") as f:
        f.write(blob)
    logger.info("Saved checkpoint %s (%d bytes)", path, len(blob))
    return hashlib.sha256(blob).hexdigest()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise CheckpointError("checkpoint is truncated")
        out = self.buf[self.pos : self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (size,) = self.unpack("<I")
        return self.take(size).decode("utf-8")

    def array(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def decode_checkpoint(blob: bytes) -> CheckpointData:
    """
    Parse and validate a checkpoint.

    Raises:
        CheckpointError: Bad magic, unsupported version, truncation or a
            checksum mismatch
    """
    if len(blob) < len(MAGIC) + 4 + _DIGEST or not blob.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic or truncated)")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    reader = _Reader(body)
    reader.take(len(MAGIC))
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch (truncated or corrupted)")

    stored_hash = reader.string()
    config = json.loads(reader.string())
    (count,) = reader.unpack("<I")
    table = []
    for _ in range(count):
        name = reader.string()
        (ndim,) = reader.unpack("<I")
        table.append((name, tuple(reader.unpack(f"<{ndim}Q")) if ndim else ()))
    params = {name: reader.array(shape) for name, shape in table}
    shapes = dict(table)

    step, moment_count = reader.unpack("<QI")
    moments = {}
    for _ in range(moment_count):
        name = reader.string()
        if name not in shapes:
            raise CheckpointError(f"optimizer state for unknown parameter '{name}'")
        moments[name] = (reader.array(shapes[name]), reader.array(shapes[name]))
    if reader.pos != len(body):
        raise CheckpointError("trailing bytes after optimizer state")
    return CheckpointData(version, stored_hash, config, params, step, moments)


def read_checkpoint(path: str) -> CheckpointData:
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())


def restore(data: CheckpointData) -> Tuple[PptModel, Optional[OptimizerState]]:
    """Model and optimizer from decoded data; the optimizer is None when none was saved."""
    cfg = data.run_config
    if config_hash(cfg) != data.config_hash:
        raise CheckpointError("stored config hash does not match the stored config")
    model = PptModel(cfg)
    model.load_values(data.params)
    extra = sorted(set(data.params) - set(model.state_values()))
    if extra:
        raise CheckpointError(f"checkpoint holds unknown parameters: {extra[:3]}")
    if not data.moments:
        return model, None
    opt = OptimizerState.for_model(model, cfg)
    if set(data.moments) != set(opt.names()):
        raise CheckpointError("optimizer state does not match the trainable parameters")
    opt.load_moments(
        {name: m for name, (m, _) in data.moments.items()},
        {name: v for name, (_, v) in data.moments.items()},
        data.step,
    )
    return model, opt


def load_checkpoint(path: str) -> Tuple[PptModel, Optional[OptimizerState]]:
    """Rebuild the model and optimizer a checkpoint was saved from."""
    model, opt = restore(read_checkpoint(path))
    logger.info("Loaded checkpoint %s (%s mode, step %d)", path, model.cfg.mode, opt.step_count if opt else 0)
    return model, opt


def load_into(model: PptModel, path: str, prefixes=None) -> None:
    """Copy a checkpoint's parameter values into an existing model."""
    model.load_values(read_checkpoint(path).params, prefixes=prefixes)
