"""Reverse-mode differentiation over float64 numpy arrays.

Only the operations the point-video encoder needs are provided. Each op builds
its output eagerly and attaches a closure that pushes the upstream gradient to
its inputs; `Tensor.backward` replays the closures in reverse topological
order.
"""
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Callable, Iterator, Sequence

import numpy as np

from .. import instrument
from ..errors import ConfigError, DimensionError

_grad_enabled: ContextVar[bool] = ContextVar("pvnext_grad_enabled", default=True)


@contextmanager
def no_grad() -> Iterator[None]:
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_prev", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, _children: tuple = (), _op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim == 0:
            self.data = self.data.reshape(())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = np.zeros_like(self.data) if requires_grad else None
        self._prev = _children
        self._backward: Callable[[], None] = _noop
        self._op = _op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self, grad: np.ndarray | None = None) -> None:
        if not self.requires_grad:
            raise ConfigError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() needs an explicit gradient for shape {self.shape}")
            grad = np.ones_like(self.data)

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if child.requires_grad and id(child) not in seen:
                    stack.append((child, False))

        for node in order:
            if node._prev:
                node.grad = np.zeros_like(node.data)
        grad = np.asarray(grad, dtype=np.float64)
        if self._prev:
            self.grad = grad.copy()
        else:
            self._accumulate(grad)
        for node in reversed(order):
            node._backward()

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def relu(self) -> "Tensor":
        return relu(self)


def _noop() -> None:
    return None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, children: tuple, op: str) -> Tensor:
    track = _grad_enabled.get() and any(c.requires_grad for c in children)
    return Tensor(data, requires_grad=track, _children=children if track else (), _op=op)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data + b.data, (a, b), "add")

    def _backward() -> None:
        a._accumulate(out.grad)
        b._accumulate(out.grad)

    out._backward = _backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes {a.shape} and {b.shape} differ")
    out = _result(a.data - b.data, (a, b), "sub")

    def _backward() -> None:
        a._accumulate(out.grad)
        b._accumulate(-out.grad)

    out._backward = _backward
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out[..., o] = bias[o] + sum_i weight[o, i] * x[..., i]."""
    x = _as_tensor(x)
    out_dim, in_dim = weight.shape
    if x.data.ndim < 1 or x.shape[-1] != in_dim:
        raise DimensionError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    if bias.shape != (out_dim,):
        raise DimensionError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
    lead = x.shape[:-1]
    x2d = x.data.reshape(-1, in_dim)
    y2d = x2d @ weight.data.T + bias.data
    instrument.current().macs += x2d.shape[0] * in_dim * out_dim
    out = _result(y2d.reshape(*lead, out_dim), (x, weight, bias), "linear")

    def _backward() -> None:
        g2d = out.grad.reshape(-1, out_dim)
        if weight.requires_grad:
            weight._accumulate(g2d.T @ x2d)
        if bias.requires_grad:
            bias._accumulate(g2d.sum(axis=0))
        if x.requires_grad:
            x._accumulate((g2d @ weight.data).reshape(x.shape))

    out._backward = _backward
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = _result(np.where(mask, x.data, 0.0), (x,), "relu")

    def _backward() -> None:
        x._accumulate(out.grad * mask)

    out._backward = _backward
    return out


def maxpool(x: Tensor, axis: int) -> tuple[Tensor, np.ndarray]:
    """Max over `axis`, dropping it. Ties go to the lowest index."""
    ndim = x.data.ndim
    if not -ndim <= axis < ndim:
        raise DimensionError(f"maxpool: axis {axis} invalid for shape {x.shape}")
    axis = axis % ndim
    if x.shape[axis] == 0:
        raise DimensionError(f"maxpool: axis {axis} of shape {x.shape} is empty")
    argmax = np.argmax(x.data, axis=axis)
    picked = np.expand_dims(argmax, axis)
    out = _result(np.take_along_axis(x.data, picked, axis=axis).squeeze(axis), (x,), "maxpool")

    def _backward() -> None:
        routed = np.zeros_like(x.data)
        np.put_along_axis(routed, picked, np.expand_dims(out.grad, axis), axis=axis)
        x._accumulate(routed)

    out._backward = _backward
    return out, argmax


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    out = _result(x.data.mean(axis=axis), (x,), "mean")

    def _backward() -> None:
        g = out.grad if axis is None else np.expand_dims(out.grad, axis)
        x._accumulate(np.broadcast_to(g / count, x.shape))

    out._backward = _backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    ndim = tensors[0].data.ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.data.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise DimensionError(f"concat: shapes {tensors[0].shape} and {t.shape} are incompatible")
    sizes = [t.shape[axis] for t in tensors]
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")

    def _backward() -> None:
        parts = np.split(out.grad, np.cumsum(sizes)[:-1], axis=axis)
        for t, g in zip(tensors, parts):
            t._accumulate(g)

    out._backward = _backward
    return out


def take(x: Tensor, index: tuple) -> Tensor:
    """Advanced-index gather, `x.data[index]`; repeated indices accumulate gradient."""
    out = _result(x.data[index], (x,), "take")

    def _backward() -> None:
        routed = np.zeros_like(x.data)
        np.add.at(routed, index, out.grad)
        x._accumulate(routed)

    out._backward = _backward
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = _result(x.data.reshape(shape), (x,), "reshape")

    def _backward() -> None:
        x._accumulate(out.grad.reshape(x.shape))

    out._backward = _backward
    return out


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], max-shifted."""
    if logits.data.ndim != 2:
        raise DimensionError(f"softmax_cross_entropy: logits shape {logits.shape} is not B x C")
    batch, classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != batch:
        raise DimensionError(f"softmax_cross_entropy: {labels.shape[0]} labels for logits shape {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ConfigError(f"softmax_cross_entropy: labels must lie in [0, {classes}), got {labels.tolist()}")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    losses = log_norm - shifted[rows, labels]
    out = _result(np.asarray(losses.mean()), (logits,), "softmax_cross_entropy")

    def _backward() -> None:
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, labels] -= 1.0
        logits._accumulate(probs * (out.grad / batch))

    out._backward = _backward
    return out
