from functools import lru_cache
from typing import Optional

from .checkpoint import load_checkpoint
from .config import settings
from .network import PvNeXt


@lru_cache(maxsize=1)
def _load(path: str) -> PvNeXt:
    return load_checkpoint(path)


async def get_model() -> Optional[PvNeXt]:
    """The served classifier, or None when no checkpoint is configured."""
    if not settings.CHECKPOINT_PATH:
        return None
    return _load(settings.CHECKPOINT_PATH)
