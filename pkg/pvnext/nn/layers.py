import math
from typing import Iterator, Sequence

import numpy as np

from ..errors import ConfigError
from .autodiff import Tensor, linear, relu


class Module:
    """Anything holding named parameter tensors."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        raise NotImplementedError

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())


class LinearLayer(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"linear layer dimensions must be positive, got {in_dim} -> {out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        bound = math.sqrt(6.0 / (in_dim + out_dim))
        self.weight = Tensor(rng.uniform(-bound, bound, size=(out_dim, in_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}weight", self.weight
        yield f"{prefix}bias", self.bias

    def __repr__(self) -> str:
        return f"LinearLayer({self.in_dim} -> {self.out_dim})"


def forward_linear(x: Tensor, layer: LinearLayer) -> Tensor:
    return layer(x)


class MlpBlock(Module):
    """Linear layers with ReLU between them; ReLU after the last only if `final_activation`."""

    def __init__(self, widths: Sequence[int], rng: np.random.Generator, final_activation: bool = False):
        widths = list(widths)
        if len(widths) < 2:
            raise ConfigError(f"an MLP needs an input width and at least one layer width, got {widths}")
        self.widths = widths
        self.final_activation = final_activation
        self.layers = [LinearLayer(widths[i], widths[i + 1], rng) for i in range(len(widths) - 1)]

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.final_activation:
                x = relu(x)
        return x

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for i, layer in enumerate(self.layers):
            yield from layer.named_parameters(f"{prefix}{i}.")

    def macs_per_row(self) -> int:
        return sum(layer.in_dim * layer.out_dim for layer in self.layers)

    def __repr__(self) -> str:
        return f"MlpBlock({' -> '.join(map(str, self.widths))})"
