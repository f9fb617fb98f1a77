import hashlib
import json
import logging
from typing import Any

import numpy as np
from pydantic import BaseModel
from rich.console import Console
from rich.logging import RichHandler

console = Console()


def setup_logging(level: str = "INFO") -> None:
    """Route every library logger through a single rich handler."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level.upper())


def canonical_json(model: BaseModel | dict[str, Any]) -> str:
    payload = model.model_dump(mode="json") if isinstance(model, BaseModel) else model
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_digest(model: BaseModel) -> bytes:
    """32-byte SHA-256 of the canonical JSON dump of a config model."""
    return hashlib.sha256(canonical_json(model).encode("utf-8")).digest()


def array_checksum(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return digest.hexdigest()[:16]
