"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Just enough operations for recurrent cells, attention, and layer norm.  Every
op records its parents and a gradient closure; `backward` walks the tape in
reverse topological order.  Broadcasting is supported; gradients are summed
back to the parent's shape.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    # Sum over leading axes added by broadcasting, then over size-1 axes.
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "parents", "grad_fns", "requires_grad")

    def __init__(self, data, requires_grad=False, parents=(), grad_fns=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.parents = parents if self.requires_grad else ()
        self.grad_fns = grad_fns if self.requires_grad else ()

    @property
    def shape(self):
        return self.data.shape

    # -- graph construction helpers ---------------------------------------
    @staticmethod
    def _coerce(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        other = self._coerce(other)
        return Tensor(
            self.data + other.data,
            parents=(self, other),
            grad_fns=(
                lambda g: _unbroadcast(g, self.data.shape),
                lambda g: _unbroadcast(g, other.data.shape),
            ),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, parents=(self,), grad_fns=(lambda g: -g,))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        return Tensor(
            self.data * other.data,
            parents=(self, other),
            grad_fns=(
                lambda g: _unbroadcast(g * other.data, self.data.shape),
                lambda g: _unbroadcast(g * self.data, other.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        return Tensor(
            self.data / other.data,
            parents=(self, other),
            grad_fns=(
                lambda g: _unbroadcast(g / other.data, self.data.shape),
                lambda g: _unbroadcast(-g * self.data / other.data**2, other.data.shape),
            ),
        )

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._coerce(other)
        out = self.data @ other.data

        def grad_a(g):
            return _unbroadcast(g @ np.swapaxes(other.data, -1, -2), self.data.shape)

        def grad_b(g):
            return _unbroadcast(np.swapaxes(self.data, -1, -2) @ g, other.data.shape)

        return Tensor(out, parents=(self, other), grad_fns=(grad_a, grad_b))

    __matmul__ = matmul

    def __getitem__(self, idx):
        def grad(g):
            out = np.zeros_like(self.data)
            out[idx] = g
            return out

        return Tensor(self.data[idx], parents=(self,), grad_fns=(grad,))

    def reshape(self, *shape):
        old = self.data.shape
        return Tensor(self.data.reshape(*shape), parents=(self,),
                      grad_fns=(lambda g: g.reshape(old),))

    def transpose(self, axes):
        inv = np.argsort(axes)
        return Tensor(self.data.transpose(axes), parents=(self,),
                      grad_fns=(lambda g: g.transpose(inv),))

    def sum(self, axis=None, keepdims=False):
        def grad(g):
            if axis is None:
                return np.full_like(self.data, g)
            gg = g if keepdims else np.expand_dims(g, axis)
            return np.broadcast_to(gg, self.data.shape).copy()

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims),
                      parents=(self,), grad_fns=(grad,))

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor(out, parents=(self,), grad_fns=(lambda g: g * (1 - out**2),))

    def sigmoid(self):
        out = 1.0 / (1.0 + np.exp(-self.data))
        return Tensor(out, parents=(self,), grad_fns=(lambda g: g * out * (1 - out),))

    def exp(self):
        out = np.exp(self.data)
        return Tensor(out, parents=(self,), grad_fns=(lambda g: g * out,))

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor(out, parents=(self,), grad_fns=(lambda g: g * 0.5 / out,))

    def masked_fill(self, mask: np.ndarray, value: float) -> "Tensor":
        """Where mask is True keep the value; where False substitute `value`."""
        keep = np.asarray(mask, dtype=bool)
        out = np.where(keep, self.data, value)
        return Tensor(out, parents=(self,), grad_fns=(lambda g: np.where(keep, g, 0.0),))

    # -- backward ----------------------------------------------------------
    def backward(self, grad=None):
        if grad is None:
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node.grad is None:
                continue
            for parent, fn in zip(node.parents, node.grad_fns):
                if not parent.requires_grad:
                    continue
                g = fn(node.grad)
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def make_grad(i):
        def grad(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(offsets[i], offsets[i + 1])
            return g[tuple(sl)]

        return grad

    return Tensor(out, parents=tuple(tensors),
                  grad_fns=tuple(make_grad(i) for i in range(len(tensors))))


def stack(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = np.stack([t.data for t in tensors], axis=axis)

    def make_grad(i):
        def grad(g):
            return np.take(g, i, axis=axis)

        return grad

    return Tensor(out, parents=tuple(tensors),
                  grad_fns=tuple(make_grad(i) for i in range(len(tensors))))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    # Subtracting the (detached) max is gradient-neutral and stabilizes exp.
    shifted = x - Tensor(x.data.max(axis=axis, keepdims=True))
    e = shifted.exp()
    return e / e.sum(axis=axis, keepdims=True)
