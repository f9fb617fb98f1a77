"""PVNX checkpoints: named float64 parameter tensors behind a config digest.

Layout (little-endian): magic b"PVNX", u16 version, 32-byte SHA-256 of the
model config, then records until end of file. A record is a u16 name length,
the UTF-8 name, a u8 rank, rank u32 dims and the values as float64.

The model config itself travels in a JSON sidecar next to the checkpoint so
`eval` and the HTTP surface can rebuild the network without repeating flags.
"""
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from .errors import BadMagicError, ConfigError, DataError, TruncatedFileError, VersionMismatchError
from .models.config import ModelConfig
from .network import PvNeXt
from .utils import config_digest

logger = logging.getLogger(__name__)

CKPT_MAGIC = b"PVNX"
CKPT_VERSION = 1
CKPT_HEADER = struct.Struct("<4sH32s")

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def encode_checkpoint(model: PvNeXt) -> bytes:
    chunks = [CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, config_digest(model.cfg))]
    for name, param in model.named_parameters():
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", param.data.ndim))
        chunks.append(struct.pack(f"<{param.data.ndim}I", *param.data.shape))
        chunks.append(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(path: PathLike, model: PvNeXt) -> None:
    path = Path(path)
    path.write_bytes(encode_checkpoint(model))
    sidecar_path(path).write_text(model.cfg.model_dump_json(indent=2), encoding="utf-8")
    logger.info("saved %d parameters to %s", model.num_parameters(), path)


def decode_checkpoint(raw: bytes, source: str = "checkpoint") -> tuple[bytes, dict[str, np.ndarray]]:
    """(config digest, parameters by name) from PVNX bytes."""
    if len(raw) < CKPT_HEADER.size:
        raise TruncatedFileError(f"{source}: {len(raw)} bytes is shorter than the checkpoint header")
    magic, version, digest = CKPT_HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC:
        raise BadMagicError(f"{source}: bad magic {magic!r}, expected {CKPT_MAGIC!r}")
    if version != CKPT_VERSION:
        raise VersionMismatchError(f"{source}: checkpoint version {version}, this reader handles {CKPT_VERSION}")

    params: dict[str, np.ndarray] = {}
    offset = CKPT_HEADER.size

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(raw):
            raise TruncatedFileError(f"{source}: record runs past the end of the file at byte {offset}")
        chunk = raw[offset : offset + size]
        offset += size
        return chunk

    while offset < len(raw):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        values = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)
        if name in params:
            raise DataError(f"{source}: parameter {name!r} stored twice", code="duplicate")
        params[name] = values.reshape(dims)
    return digest, params


def load_config(path: PathLike) -> ModelConfig:
    sidecar = sidecar_path(path)
    try:
        return ModelConfig.model_validate_json(sidecar.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read model config {sidecar}: {exc.strerror}", code="unreadable") from exc
    except ValidationError as exc:
        raise ConfigError(f"{sidecar}: invalid model config: {exc}") from exc


def load_checkpoint(path: PathLike, cfg: Optional[ModelConfig] = None) -> PvNeXt:
    """Rebuild a model from `path`; `cfg` defaults to the JSON sidecar."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc.strerror}", code="unreadable") from exc
    digest, params = decode_checkpoint(raw, str(path))

    cfg = cfg if cfg is not None else load_config(path)
    if digest != config_digest(cfg):
        raise ConfigError(f"{path} was trained with a different model config", code="digest_mismatch")

    model = PvNeXt(cfg)
    expected = dict(model.named_parameters())
    if set(expected) != set(params):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise DataError(f"{path}: parameter set differs (missing {missing}, unexpected {extra})", code="params")
    for name, tensor in expected.items():
        if params[name].shape != tensor.shape:
            raise DataError(
                f"{path}: {name} has shape {params[name].shape}, model expects {tensor.shape}", code="params"
            )
        tensor.data[...] = params[name]
    return model
