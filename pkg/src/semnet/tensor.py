"""Dense float64 tensors with tape-free reverse-mode differentiation.

Every tensor produced by a differentiable op keeps references to its parents
and a closure mapping the output gradient to parent gradients.  ``backward``
sorts the reachable graph topologically and visits each node once.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A row-major float64 array with an optional gradient buffer.

    Images and feature maps use the (batch, channel, height, width) layout;
    pixel sequences use (batch, length, channel).
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=DTYPE)
        self.data = arr if arr.flags.c_contiguous else np.ascontiguousarray(arr)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.name = name

    # -- construction helpers -------------------------------------------------
    @classmethod
    def zeros(cls, *shape, requires_grad=False):
        return cls(np.zeros(shape), requires_grad=requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- autodiff ---------------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        backward(self, grad)

    # -- operators ----------------------------------------------------------------
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import functional as F
        return F.mul(self, -1.0)

    def __truediv__(self, other):
        from . import functional as F
        if isinstance(other, Tensor):
            return F.div(self, other)
        return F.mul(self, 1.0 / other)

    def sum(self):
        from . import functional as F
        return F.sum(self)

    def mean(self):
        from . import functional as F
        return F.mean(self)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def transpose(self, *axes):
        from . import functional as F
        return F.transpose(self, axes)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(data: np.ndarray, parents: Iterable[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op result; records the node only when some parent needs grad."""
    out = Tensor(data)
    parents = tuple(parents)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


class Graph:
    """Operations reachable from ``root``, in topological order (inputs first)."""

    def __init__(self, root: Tensor):
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in reversed(node._parents):
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.root = root
        self.nodes = order

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    """Populate ``.grad`` of every leaf tensor that requires grad.

    Gradients accumulate into existing buffers, so call ``zero_grad`` between
    independent passes.
    """
    if grad is None:
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    if not loss.requires_grad:
        return
    graph = Graph(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.asarray(grad, dtype=DTYPE)}
    for node in reversed(graph.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
