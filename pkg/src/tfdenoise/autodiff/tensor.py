"""Dense tensors with a reverse-mode gradient tape.

Every op returns a new :class:`Tensor` holding references to its inputs and a
closure that maps the output gradient to input gradients. ``backward`` walks
that graph once in reverse topological order and accumulates into the
``grad`` of leaf tensors that require it.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import NonScalarLoss, ShapeMismatch

DEFAULT_DTYPE = np.float32

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str = ""):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype.kind == "f" else DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.name = name

    # --- construction helpers -------------------------------------------
    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn) -> "Tensor":
        out = cls(data, dtype=data.dtype)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # --- basic properties -------------------------------------------------
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
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # --- autodiff ---------------------------------------------------------
    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise NonScalarLoss(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return

        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise ShapeMismatch(f"gradient shape {pg.shape} != {parent.shape}")
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # --- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(self._lift(other)))

    def __rsub__(self, other):
        return add(self._lift(other), neg(self))

    def __mul__(self, other):
        return mul(self, self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor / tensor is not supported; multiply by a constant")
        return mul(self, self._lift(1.0 / other))

    def sum(self):
        return tsum(self)

    def mean(self):
        return mean(self)

    def abs(self):
        return tabs(self)

    def log(self):
        return log(self)


def _topological_order(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from exc


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return Tensor._from_op(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    return Tensor._from_op(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def tsum(a: Tensor) -> Tensor:
    return Tensor._from_op(
        np.asarray(a.data.sum(), dtype=a.dtype), (a,),
        lambda g: (np.broadcast_to(g, a.shape).astype(a.dtype),),
    )


def mean(a: Tensor) -> Tensor:
    n = a.size
    return Tensor._from_op(
        np.asarray(a.data.mean(), dtype=a.dtype), (a,),
        lambda g: (np.full(a.shape, g / n, dtype=a.dtype),),
    )


def tabs(a: Tensor) -> Tensor:
    return Tensor._from_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def log(a: Tensor) -> Tensor:
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes only where the input is inside."""
    inside = (a.data >= lo) & (a.data <= hi)
    return Tensor._from_op(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor._from_op(a.data * mask, (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.data > 0, 1.0, slope).astype(a.dtype)
    return Tensor._from_op(a.data * factor, (a,), lambda g: (g * factor,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return Tensor._from_op(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Tensor) -> Tensor:
    # split by sign so large |x| never overflows exp
    x = a.data
    e = np.exp(-np.abs(x))
    y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(a.dtype)
    return Tensor._from_op(y, (a,), lambda g: (g * y * (1.0 - y),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    return Tensor._from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def permute(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))
    return Tensor._from_op(
        np.ascontiguousarray(a.data.transpose(axes)), (a,),
        lambda g: (g.transpose(inverse),),
    )


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 4 or b.ndim != 4 or a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeMismatch(f"cannot concatenate {a.shape} and {b.shape} along channels")
    ca = a.shape[1]
    return Tensor._from_op(
        np.concatenate([a.data, b.data], axis=1), (a, b),
        lambda g: (g[:, :ca], g[:, ca:]),
    )
