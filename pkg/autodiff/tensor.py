"""
Dense float64 tensors with reverse-mode differentiation.

A Tensor records the operation that produced it only when gradient recording
is enabled and at least one input requires a gradient, so forward passes over
frozen weights build no graph at all.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ContractError, DimensionError, NumericDomainError

ArrayLike = Union[np.ndarray, float, int, Sequence]

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording for the current thread."""
    previous = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericDomainError(f"non-finite value produced by '{op}'")


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """n-dimensional array of 64-bit reals with an optional gradient slot."""

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]] = None
        self._op = ""

    # ------------------------------------------------------------------
    # graph plumbing

    @staticmethod
    def _result(
        data: np.ndarray,
        parents: Tuple["Tensor", ...],
        op: str,
        backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    ) -> "Tensor":
        data = np.asarray(data, dtype=np.float64)
        _check_finite(data, op)
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._op = op
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    def backward(self) -> None:
        """
        Populate `.grad` on every leaf reachable from this scalar.

        Leaf gradients accumulate: calling backward twice on the same graph
        without `zero_grad` adds the second gradient to the first.
        """
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            return

        order = self._topological_order()
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node._backward is None:
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # ------------------------------------------------------------------
    # introspection

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op='{self._op}', requires_grad={self.requires_grad})"

    def __len__(self):
        return self.data.shape[0]

    # ------------------------------------------------------------------
    # elementwise arithmetic

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._result(
            self.data + other.data,
            (self, other),
            "add",
            lambda g: (unbroadcast(g, a_shape), unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._result(-self.data, (self,), "neg", lambda g: (-g,))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) + (-self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._result(
            a * b,
            (self, other),
            "mul",
            lambda g: (unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = as_tensor(other)
        a, b = self.data, other.data
        return Tensor._result(
            a / b,
            (self, other),
            "div",
            lambda g: (unbroadcast(g / b, a.shape), unbroadcast(-g * a / (b * b), b.shape)),
        )

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return as_tensor(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        a = self.data
        return Tensor._result(
            a ** exponent,
            (self,),
            "pow",
            lambda g: (g * exponent * a ** (exponent - 1),),
        )

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    # ------------------------------------------------------------------
    # unary functions

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._result(out, (self,), "exp", lambda g: (g * out,))

    def log(self) -> "Tensor":
        a = self.data
        if np.any(a <= 0):
            raise NumericDomainError("log of a non-positive value")
        return Tensor._result(np.log(a), (self,), "log", lambda g: (g / a,))

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor._result(out, (self,), "sqrt", lambda g: (g / (2.0 * out),))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._result(out, (self,), "tanh", lambda g: (g * (1.0 - out * out),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor._result(self.data * mask, (self,), "relu", lambda g: (g * mask,))

    def clamp_min(self, floor: float) -> "Tensor":
        mask = self.data >= floor
        return Tensor._result(np.maximum(self.data, floor), (self,), "clamp_min", lambda g: (g * mask,))

    # ------------------------------------------------------------------
    # reductions

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                axes = (axis,) if isinstance(axis, int) else axis
                g = np.expand_dims(g, tuple(ax % len(shape) for ax in axes))
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._result(np.sum(self.data, axis=axis, keepdims=keepdims), (self,), "sum", backward)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            count = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            count = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def max(self, axis: int) -> "Tensor":
        """Maximum along `axis`; the gradient goes to the first maximal entry."""
        a = self.data
        index = np.expand_dims(np.argmax(a, axis=axis), axis)

        def backward(g):
            full = np.zeros_like(a)
            np.put_along_axis(full, index, np.expand_dims(g, axis), axis=axis)
            return (full,)

        return Tensor._result(np.take_along_axis(a, index, axis=axis).squeeze(axis), (self,), "max", backward)

    # ------------------------------------------------------------------
    # shape manipulation

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor._result(self.data.reshape(shape), (self,), "reshape", lambda g: (g.reshape(original),))

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        return Tensor._result(
            np.transpose(self.data, axes), (self,), "transpose", lambda g: (np.transpose(g, inverse),)
        )

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def swap_last(self) -> "Tensor":
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return self.transpose(*axes)

    def __getitem__(self, index) -> "Tensor":
        shape = self.shape

        def backward(g):
            full = np.zeros(shape)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._result(np.array(self.data[index]), (self,), "getitem", backward)


def as_tensor(value: Union["Tensor", ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul inner extents differ", a.shape, b.shape)
    x, y = a.data, b.data

    def backward(g):
        ga = g @ np.swapaxes(y, -1, -2)
        gb = np.swapaxes(x, -1, -2) @ g
        return unbroadcast(ga, x.shape), unbroadcast(gb, y.shape)

    return Tensor._result(x @ y, (a, b), "matmul", backward)


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return Tensor._result(
        np.concatenate([t.data for t in tensors], axis=axis),
        tuple(tensors),
        "concat",
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    count = len(tensors)
    return Tensor._result(
        np.stack([t.data for t in tensors], axis=axis),
        tuple(tensors),
        "stack",
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(count)),
    )
