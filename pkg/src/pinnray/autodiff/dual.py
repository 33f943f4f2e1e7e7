"""Forward-mode dual numbers.

``Dual.val`` and ``Dual.tan`` may be Python floats, numpy arrays or tape
``Var`` objects.  When they are Vars, the whole forward-mode computation is
recorded on the tape and can be differentiated again in reverse mode, which
is how parameter gradients of losses built from spatial derivatives are
obtained.

For batched evaluation the tangent carries one leading axis per seeded input
direction: ``val`` has shape ``(n, k)`` and ``tan`` has shape ``(d, n, k)``.
Broadcasting then makes ``val * tan`` line up without special cases.
"""
from __future__ import annotations

import numpy as np

from .tape import Var


def _value(x):
    return x.value if isinstance(x, Var) else x


class Dual:
    __slots__ = ("val", "tan")

    def __init__(self, val, tan):
        self.val = val
        self.tan = tan

    def __repr__(self):
        return f"Dual({_value(self.val)!r}, {_value(self.tan)!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.tan + o.tan)
        return Dual(self.val + o, self.tan)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.tan - o.tan)
        return Dual(self.val - o, self.tan)

    def __rsub__(self, o):
        return Dual(o - self.val, -self.tan)

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val * o.val, self.val * o.tan + o.val * self.tan)
        return Dual(self.val * o, self.tan * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            q = self.val / o.val
            return Dual(q, (self.tan - q * o.tan) / o.val)
        return Dual(self.val / o, self.tan / o)

    def __rtruediv__(self, o):
        q = o / self.val
        return Dual(q, -q * self.tan / self.val)

    def __pow__(self, p):
        if p != 2:
            raise TypeError("only squaring is supported on dual numbers")
        return Dual(self.val * self.val, 2.0 * self.val * self.tan)

    def __matmul__(self, w):
        # w is constant with respect to the seeded inputs
        return Dual(self.val @ w, self.tan @ w)

    def __getitem__(self, idx):
        # idx addresses the value; tangents keep their leading direction axis
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.tan[(slice(None),) + idx])

    def tanh(self) -> "Dual":
        y = np.tanh(self.val)
        return Dual(y, (1.0 - y * y) * self.tan)

    def square(self) -> "Dual":
        return self ** 2


def tanh(x):
    """tanh for floats, arrays, tape Vars and Duals."""
    if isinstance(x, Dual):
        return x.tanh()
    return np.tanh(x)


def seed_inputs(points: np.ndarray, center=(0.0, 0.0), scale=(1.0, 1.0)) -> Dual:
    """Dual for the affine-normalized inputs ``(points - center) / scale``.

    The tangent directions are d/dx and d/dy of the *physical* coordinates,
    so derivatives carried through the network are physical derivatives.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    center = np.asarray(center, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    val = (pts - center) / scale
    tan = np.zeros((2,) + pts.shape)
    tan[0, :, 0] = 1.0 / scale[0]
    tan[1, :, 1] = 1.0 / scale[1]
    return Dual(val, tan)
