"""Parameter containers and the small layer set the network needs."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import Tensor


class Module:
    """Base class; parameters and submodules are discovered from attributes.

    Attribute insertion order fixes parameter order, which makes parameter
    names, counts and checkpoint layout deterministic.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def zero_weights(self) -> None:
        for p in self.parameters():
            p.data[...] = 0.0

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    bound = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros_param(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def ones_param(*shape: int) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_features: int, out_features: int, bias: bool = True):
        self.weight = uniform_fan_in(rng, (out_features, in_features), in_features)
        self.bias = zeros_param(out_features) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, rng: np.random.Generator, in_ch: int, out_ch: int, kernel: int = 1,
                 depthwise: bool = False, bias: bool = True):
        if kernel not in (1, 3):
            raise ValueError(f"kernel must be 1 or 3, got {kernel}")
        if depthwise:
            if in_ch != out_ch:
                raise ValueError("depthwise conv needs in_ch == out_ch")
            self.weight = uniform_fan_in(rng, (out_ch, 1, kernel, kernel), kernel * kernel)
        else:
            self.weight = uniform_fan_in(rng, (out_ch, in_ch, kernel, kernel), in_ch * kernel * kernel)
        self.bias = zeros_param(out_ch) if bias else None
        self.depthwise = depthwise

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, depthwise=self.depthwise)


class LayerNorm(Module):
    """Channel-wise layer norm; ``axis`` selects the channel axis."""

    def __init__(self, channels: int, axis: int = 1, eps: float = 1e-6):
        self.gain = ones_param(channels)
        self.offset = zeros_param(channels)
        self.axis = axis
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.offset, axis=self.axis, eps=self.eps)
