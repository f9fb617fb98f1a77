import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from ..errors import DimensionError, NumericError
from .autodiff import Tensor


class SgdSchedule(BaseModel):
    base_lr: float = Field(default=0.01, gt=0)
    total_epochs: int = Field(gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)

    def lr(self, epoch: int) -> float:
        """Cosine decay from base_lr at epoch 0 down to 0 at total_epochs."""
        epoch = min(max(epoch, 0), self.total_epochs)
        return self.base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / self.total_epochs))


def sgd_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    schedule: SgdSchedule,
    epoch: int,
    buffers: Optional[list[np.ndarray]] = None,
    names: Optional[Sequence[str]] = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """One momentum-SGD update; returns (new params, new momentum buffers)."""
    names = list(names) if names is not None else [f"param[{i}]" for i in range(len(params))]
    if buffers is None:
        buffers = [np.zeros_like(p) for p in params]
    counts = {"parameters": len(params), "gradients": len(grads), "buffers": len(buffers), "names": len(names)}
    if len(set(counts.values())) != 1:
        raise DimensionError(f"sgd_step got mismatched counts: {counts}")
    lr = schedule.lr(epoch)
    new_params, new_buffers = [], []
    for name, p, g, buf in zip(names, params, grads, buffers):
        if p.shape != g.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
        velocity = schedule.momentum * buf + g
        new_buffers.append(velocity)
        new_params.append(p - lr * velocity)
    return new_params, new_buffers


class Sgd:
    """In-place momentum SGD over named tensors."""

    def __init__(self, named_params: Sequence[tuple[str, Tensor]], schedule: SgdSchedule):
        self.names = [name for name, _ in named_params]
        self.params = [param for _, param in named_params]
        self.schedule = schedule
        self.buffers = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, epoch: int) -> float:
        new_params, self.buffers = sgd_step(
            [p.data for p in self.params],
            [p.grad for p in self.params],
            self.schedule,
            epoch,
            self.buffers,
            self.names,
        )
        for p, value in zip(self.params, new_params):
            p.data = value
        return self.schedule.lr(epoch)
