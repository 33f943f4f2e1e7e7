"""Array-valued reverse-mode tape.

Every primitive applied to a :class:`Var` appends one node to the tape of its
operands, holding the parent indices and one vector-Jacobian closure per
parent.  Nodes are appended in evaluation order, so the list is already
topologically sorted and :meth:`Tape.backward` is a single reverse sweep.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class UnsupportedPrimitiveError(TypeError):
    """Raised when a Var is passed to an operation the tape cannot record."""


class NonFiniteError(FloatingPointError):
    """Raised when a value or gradient on the tape is not finite."""


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    # sum g down to `shape`, undoing numpy broadcasting
    if g.shape == shape:
        return g
    ndim_extra = g.ndim - len(shape)
    if ndim_extra > 0:
        g = g.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None for i in items)


class _Node:
    __slots__ = ("op", "parents", "vjps")

    def __init__(self, op: str, parents: tuple, vjps: tuple):
        self.op = op
        self.parents = parents
        self.vjps = vjps


class Tape:
    """Single-use record of primitive operations.

    A tape is not thread safe; build one per evaluation.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []
        self.names: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, name: str | None = None) -> "Var":
        v = self._push("leaf", np.asarray(value, dtype=np.float64), (), ())
        if name is not None:
            self.names[v.index] = name
        return v

    def _push(self, op: str, value: np.ndarray, parents: tuple, vjps: tuple) -> "Var":
        idx = len(self.nodes)
        self.nodes.append(_Node(op, parents, vjps))
        self.values.append(value)
        return Var(self, idx, value)

    def backward(self, output: "Var", seed=None) -> list:
        """Reverse sweep from ``output``; returns per-node adjoints (None where unreached)."""
        if output.tape is not self:
            raise ValueError("output does not belong to this tape")
        grads: list = [None] * len(self.nodes)
        if seed is None:
            if output.value.size != 1:
                raise ValueError("backward from a non-scalar output needs an explicit seed")
            seed = np.ones_like(output.value)
        grads[output.index] = np.asarray(seed, dtype=np.float64)
        for i in range(output.index, -1, -1):
            g = grads[i]
            if g is None:
                continue
            node = self.nodes[i]
            for p, vjp in zip(node.parents, node.vjps):
                gp = vjp(g)
                grads[p] = gp if grads[p] is None else grads[p] + gp
            if node.parents:
                grads[i] = None  # interior adjoints are not needed after use
        return grads

    def gradient(self, output: "Var", wrt: Sequence["Var"]) -> list[np.ndarray]:
        grads = self.backward(output)
        out = []
        for v in wrt:
            g = grads[v.index]
            out.append(np.zeros_like(v.value) if g is None else g)
        return out


def _lift(x, tape: Tape):
    if isinstance(x, Var):
        if x.tape is not tape:
            raise ValueError("cannot mix Vars from different tapes")
        return x
    return None


def _binary(a, b, op: str, fwd: Callable, da: Callable, db: Callable):
    """Record fwd(a, b); da/db map (g, av, bv, out) -> adjoint contributions."""
    tape = a.tape if isinstance(a, Var) else b.tape
    va = _lift(a, tape)
    vb = _lift(b, tape)
    av = va.value if va is not None else np.asarray(a, dtype=np.float64)
    bv = vb.value if vb is not None else np.asarray(b, dtype=np.float64)
    out = fwd(av, bv)
    parents, vjps = [], []
    if va is not None:
        parents.append(va.index)
        vjps.append(lambda g: _unbroadcast(da(g, av, bv, out), av.shape))
    if vb is not None:
        parents.append(vb.index)
        vjps.append(lambda g: _unbroadcast(db(g, av, bv, out), bv.shape))
    return tape._push(op, out, tuple(parents), tuple(vjps))


def _matmul(a, b):
    tape = a.tape if isinstance(a, Var) else b.tape
    va = _lift(a, tape)
    vb = _lift(b, tape)
    av = va.value if va is not None else np.asarray(a, dtype=np.float64)
    bv = vb.value if vb is not None else np.asarray(b, dtype=np.float64)
    if av.ndim < 2 or bv.ndim < 2:
        raise UnsupportedPrimitiveError("matmul on the tape requires operands with ndim >= 2")
    out = av @ bv
    parents, vjps = [], []
    if va is not None:
        parents.append(va.index)
        vjps.append(lambda g: _unbroadcast(g @ _swap(bv), av.shape))
    if vb is not None:
        parents.append(vb.index)
        if av.ndim > 2 and bv.ndim == 2:
            # fold batch dims so the weight adjoint is one GEMM
            k = av.shape[-1]
            vjps.append(lambda g: av.reshape(-1, k).T @ g.reshape(-1, g.shape[-1]))
        else:
            vjps.append(lambda g: _unbroadcast(_swap(av) @ g, bv.shape))
    return tape._push("matmul", out, tuple(parents), tuple(vjps))


def _unary(a: "Var", op: str, out: np.ndarray, vjp: Callable) -> "Var":
    return a.tape._push(op, out, (a.index,), (vjp,))


def add(a, b):
    return _binary(a, b, "add", np.add, lambda g, x, y, o: g, lambda g, x, y, o: g)


def sub(a, b):
    return _binary(a, b, "sub", np.subtract, lambda g, x, y, o: g, lambda g, x, y, o: -g)


def mul(a, b):
    return _binary(a, b, "mul", np.multiply, lambda g, x, y, o: g * y, lambda g, x, y, o: g * x)


def div(a, b):
    return _binary(
        a, b, "div", np.divide,
        lambda g, x, y, o: g / y,
        lambda g, x, y, o: -g * o / y,
    )


def neg(a: "Var") -> "Var":
    return _unary(a, "neg", -a.value, lambda g: -g)


def tanh(a: "Var") -> "Var":
    y = np.tanh(a.value)
    return _unary(a, "tanh", y, lambda g: g * (1.0 - y * y))


def square(a: "Var") -> "Var":
    x = a.value
    return _unary(a, "square", x * x, lambda g: 2.0 * x * g)


def vsum(a: "Var", axis=None, keepdims: bool = False) -> "Var":
    x = a.value
    out = np.sum(x, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, x.shape).copy()

    return _unary(a, "sum", np.asarray(out, dtype=np.float64), vjp)


def mean(a: "Var", axis=None, keepdims: bool = False) -> "Var":
    x = a.value
    count = x.size if axis is None else np.prod([x.shape[i] for i in np.atleast_1d(axis)])
    out = np.mean(x, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g / count, x.shape).copy()

    return _unary(a, "mean", np.asarray(out, dtype=np.float64), vjp)


def getitem(a: "Var", idx) -> "Var":
    x = a.value
    basic = _is_basic_index(idx)

    def vjp(g):
        full = np.zeros_like(x)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return full

    return _unary(a, "getitem", np.asarray(x[idx]), vjp)


def reshape(a: "Var", shape) -> "Var":
    x = a.value
    return _unary(a, "reshape", x.reshape(shape), lambda g: g.reshape(x.shape))


def concatenate(parts: Sequence, axis: int = 0) -> "Var":
    tape = next(p.tape for p in parts if isinstance(p, Var))
    vals = [p.value if isinstance(p, Var) else np.asarray(p, dtype=np.float64) for p in parts]
    out = np.concatenate(vals, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])
    parents, vjps = [], []
    for k, p in enumerate(parts):
        if isinstance(p, Var):
            if p.tape is not tape:
                raise ValueError("cannot mix Vars from different tapes")
            sl = [slice(None)] * out.ndim
            sl[axis] = slice(bounds[k], bounds[k + 1])
            sl = tuple(sl)
            parents.append(p.index)
            vjps.append(lambda g, sl=sl: g[sl])
    return tape._push("concatenate", out, tuple(parents), tuple(vjps))


_UFUNCS = {
    np.add: add,
    np.subtract: sub,
    np.multiply: mul,
    np.true_divide: div,
    np.tanh: tanh,
    np.negative: neg,
    np.square: square,
    np.matmul: _matmul,
}


class Var:
    """A value recorded on a :class:`Tape`."""

    __slots__ = ("tape", "index", "value")
    __array_priority__ = 1000

    def __init__(self, tape: Tape, index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return _matmul(self, o)

    def __rmatmul__(self, o):
        return _matmul(o, self)

    def __pow__(self, p):
        if p == 2:
            return square(self)
        raise UnsupportedPrimitiveError(f"power {p!r} is not a tape primitive (only 2)")

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        fn = _UFUNCS.get(ufunc)
        if method != "__call__" or fn is None or kwargs:
            raise UnsupportedPrimitiveError(f"{ufunc.__name__}.{method} is not a tape primitive")
        return fn(*inputs)

    def __array_function__(self, func, types, args, kwargs):
        if func is np.sum:
            return vsum(*args, **kwargs)
        if func is np.mean:
            return mean(*args, **kwargs)
        if func is np.concatenate:
            return concatenate(*args, **kwargs)
        raise UnsupportedPrimitiveError(f"numpy.{func.__name__} is not a tape primitive")

    def __float__(self):
        return float(self.value)

    def __bool__(self):
        raise TypeError("truth value of a Var is ambiguous; compare .value instead")
