"""Exact operation counters and stage tracing.

Counters are activated per context with `counting()`; code that has nothing
active counts into a throwaway instance, so library calls never need to check.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np


@dataclass
class Counters:
    ball_queries: int = 0
    member_embeddings: int = 0
    macs: int = 0

    def add(self, other: "Counters") -> None:
        self.ball_queries += other.ball_queries
        self.member_embeddings += other.member_embeddings
        self.macs += other.macs

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


_active: ContextVar[Optional[Counters]] = ContextVar("pvnext_counters", default=None)


def current() -> Counters:
    counters = _active.get()
    return counters if counters is not None else Counters()


@contextmanager
def counting(counters: Optional[Counters] = None) -> Iterator[Counters]:
    counters = counters if counters is not None else Counters()
    token = _active.set(counters)
    try:
        yield counters
    finally:
        _active.reset(token)


@dataclass
class StageTrace:
    """What one stage saw: real and virtual groups are anchor-relative, M_out x T x K x 3."""

    stage: int
    anchor_coords: np.ndarray
    groups: np.ndarray
    virtual_groups: np.ndarray
    motion: np.ndarray
    extras: dict = field(default_factory=dict)


StageHook = Callable[[StageTrace], None]
