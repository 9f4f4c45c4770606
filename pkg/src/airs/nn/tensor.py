"""Minimal reverse-mode autodiff over float64 numpy arrays.

Ops append their results to a tape in creation order, which is already a
topological order of the graph; backward() walks the tape once in reverse,
routing each node's gradient to its inputs, and consumes the tape.  Gradients
accumulate into .grad, so computing a fresh loss and calling backward() again
adds to the accumulators.  A no_grad() context skips taping entirely, which
keeps rollout-time forwards cheap.
"""

from contextlib import contextmanager

import numpy as np

_F64 = np.dtype(np.float64)
_grad_enabled = True
_tape = []


@contextmanager
def no_grad():
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def grad_enabled() -> bool:
    return _grad_enabled


def tape_size() -> int:
    return len(_tape)


def clear_tape():
    _tape.clear()


class Tensor:
    __slots__ = ("value", "grad", "backward_fn", "requires_grad")

    def __init__(self, value, requires_grad=False):
        if type(value) is np.ndarray and value.dtype == _F64:
            self.value = value
        else:
            self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.backward_fn = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def detach(self) -> "Tensor":
        return Tensor(self.value)

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def add_grad(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_value, backward_fn) -> Tensor:
    out = Tensor(out_value)
    out.requires_grad = True
    out.backward_fn = backward_fn
    _tape.append(out)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_value = a.value + b.value
    if not (_grad_enabled and (a.requires_grad or b.requires_grad)):
        return Tensor(out_value)

    def backward_fn(g):
        if a.requires_grad:
            a.add_grad(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.add_grad(_unbroadcast(g, b.value.shape))

    return _record(out_value, backward_fn)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_value = a.value - b.value
    if not (_grad_enabled and (a.requires_grad or b.requires_grad)):
        return Tensor(out_value)

    def backward_fn(g):
        if a.requires_grad:
            a.add_grad(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.add_grad(_unbroadcast(-g, b.value.shape))

    return _record(out_value, backward_fn)


def neg(a) -> Tensor:
    a = _wrap(a)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(-a.value)
    return _record(-a.value, lambda g: a.add_grad(-g))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_value = a.value * b.value
    if not (_grad_enabled and (a.requires_grad or b.requires_grad)):
        return Tensor(out_value)

    def backward_fn(g):
        if a.requires_grad:
            a.add_grad(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b.add_grad(_unbroadcast(g * a.value, b.value.shape))

    return _record(out_value, backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_value = a.value @ b.value
    if not (_grad_enabled and (a.requires_grad or b.requires_grad)):
        return Tensor(out_value)

    def backward_fn(g):
        if a.requires_grad:
            a.add_grad(g @ b.value.T)
        if b.requires_grad:
            b.add_grad(a.value.T @ g)

    return _record(out_value, backward_fn)


def tanh(a: Tensor) -> Tensor:
    out_value = np.tanh(a.value)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(out_value)
    return _record(out_value, lambda g: a.add_grad(g * (1.0 - out_value**2)))


def _sigmoid(x):
    # exp overflow for very negative x just saturates to 0, which is correct.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def sigmoid(a: Tensor) -> Tensor:
    out_value = _sigmoid(a.value)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(out_value)
    return _record(out_value, lambda g: a.add_grad(g * out_value * (1.0 - out_value)))


def exp(a: Tensor) -> Tensor:
    out_value = np.exp(a.value)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(out_value)
    return _record(out_value, lambda g: a.add_grad(g * out_value))


def square(a: Tensor) -> Tensor:
    if not (_grad_enabled and a.requires_grad):
        return Tensor(a.value**2)
    return _record(a.value**2, lambda g: a.add_grad(g * 2.0 * a.value))


def minimum(a, b) -> Tensor:
    """Elementwise min; the gradient follows the smaller branch (ties -> a)."""
    a, b = _wrap(a), _wrap(b)
    out_value = np.minimum(a.value, b.value)
    if not (_grad_enabled and (a.requires_grad or b.requires_grad)):
        return Tensor(out_value)
    take_a = a.value <= b.value

    def backward_fn(g):
        if a.requires_grad:
            a.add_grad(_unbroadcast(g * take_a, a.value.shape))
        if b.requires_grad:
            b.add_grad(_unbroadcast(g * ~take_a, b.value.shape))

    return _record(out_value, backward_fn)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where no clamping happened."""
    out_value = np.clip(a.value, lo, hi)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(out_value)
    inside = (a.value >= lo) & (a.value <= hi)
    return _record(out_value, lambda g: a.add_grad(g * inside))


def sum_all(a: Tensor) -> Tensor:
    if not (_grad_enabled and a.requires_grad):
        return Tensor(a.value.sum())
    return _record(
        a.value.sum(),
        lambda g: a.add_grad(np.broadcast_to(g, a.value.shape).copy()),
    )


def sum_axis(a: Tensor, axis: int) -> Tensor:
    out_value = a.value.sum(axis=axis)
    if not (_grad_enabled and a.requires_grad):
        return Tensor(out_value)
    return _record(
        out_value,
        lambda g: a.add_grad(np.broadcast_to(np.expand_dims(g, axis), a.value.shape).copy()),
    )


def mean_all(a: Tensor) -> Tensor:
    n = a.value.size
    if not (_grad_enabled and a.requires_grad):
        return Tensor(a.value.mean())
    return _record(
        a.value.mean(),
        lambda g: a.add_grad(np.broadcast_to(g / n, a.value.shape).copy()),
    )


def reshape(a: Tensor, shape) -> Tensor:
    if not (_grad_enabled and a.requires_grad):
        return Tensor(a.value.reshape(shape))
    return _record(a.value.reshape(shape), lambda g: a.add_grad(g.reshape(a.value.shape)))


def backward(loss: Tensor):
    """Propagate d(loss) through every taped node into .grad accumulators.

    Consumes the tape: the graph must be rebuilt (loss recomputed) before
    calling backward again; leaf gradients then accumulate across calls.
    """
    if loss.value.ndim != 0:
        raise ValueError(f"backward() expects a scalar loss, got shape {loss.value.shape}")
    loss.add_grad(np.ones_like(loss.value))
    for node in reversed(_tape):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)
    clear_tape()
