"""Flat parameter vectors with a named layout, and parameter gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .tape import NonFiniteError, Tape, Var


@dataclass(frozen=True)
class ParamLayout:
    """Ordered map ``name -> (offset, shape)`` over a flat float64 vector."""

    entries: tuple  # ((name, offset, shape), ...)

    @classmethod
    def from_shapes(cls, shapes: Mapping[str, tuple]) -> "ParamLayout":
        entries, off = [], 0
        for name, shape in shapes.items():
            shape = tuple(int(s) for s in shape)
            entries.append((name, off, shape))
            off += int(np.prod(shape, dtype=np.int64))
        return cls(tuple(entries))

    @property
    def size(self) -> int:
        if not self.entries:
            return 0
        _, off, shape = self.entries[-1]
        return off + int(np.prod(shape, dtype=np.int64))

    @property
    def names(self) -> list[str]:
        return [e[0] for e in self.entries]

    def shapes(self) -> dict[str, tuple]:
        return {name: shape for name, _, shape in self.entries}

    def locate(self, flat_index: int) -> tuple[str, tuple]:
        """Inverse map: flat index -> (name, multi-index)."""
        for name, off, shape in self.entries:
            n = int(np.prod(shape, dtype=np.int64))
            if off <= flat_index < off + n:
                return name, tuple(int(i) for i in np.unravel_index(flat_index - off, shape))
        raise IndexError(flat_index)

    def prefixed(self, prefix: str) -> "ParamLayout":
        return ParamLayout(tuple((prefix + n, o, s) for n, o, s in self.entries))

    @staticmethod
    def concat(*layouts: "ParamLayout") -> "ParamLayout":
        entries, base = [], 0
        for lay in layouts:
            entries.extend((n, base + o, s) for n, o, s in lay.entries)
            base += lay.size
        return ParamLayout(tuple(entries))


class ParamVector:
    """A flat float64 vector together with its :class:`ParamLayout`."""

    def __init__(self, layout: ParamLayout, data=None):
        self.layout = layout
        if data is None:
            data = np.zeros(layout.size)
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (layout.size,):
            raise ValueError(f"expected {layout.size} parameters, got shape {data.shape}")
        self.data = data

    def __len__(self):
        return self.layout.size

    def __repr__(self):
        return f"ParamVector(n={len(self)}, names={self.layout.names})"

    def copy(self) -> "ParamVector":
        return ParamVector(self.layout, self.data.copy())

    def unflatten(self) -> dict[str, np.ndarray]:
        """Named views into ``data`` (writes go through)."""
        return {
            name: self.data[off:off + int(np.prod(shape, dtype=np.int64))].reshape(shape)
            for name, off, shape in self.layout.entries
        }

    @classmethod
    def flatten(cls, layout: ParamLayout, arrays: Mapping[str, np.ndarray]) -> "ParamVector":
        missing = set(layout.names) - set(arrays)
        extra = set(arrays) - set(layout.names)
        if missing or extra:
            raise KeyError(f"layout mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        data = np.empty(layout.size)
        for name, off, shape in layout.entries:
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            data[off:off + a.size] = a.ravel()
        return cls(layout, data)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.unflatten()[name]


def grad_params(
    loss_fn: Callable[[dict[str, Var]], Var],
    params: ParamVector,
) -> tuple[float, ParamVector]:
    """Evaluate ``loss_fn`` on a fresh tape and return (loss, d loss / d params).

    ``loss_fn`` receives one tape leaf per named parameter.  It may use dual
    numbers internally (nested differentiation); anything it builds from the
    supported primitives is differentiated exactly.
    """
    tape = Tape()
    leaves = {name: tape.leaf(arr, name) for name, arr in params.unflatten().items()}
    out = loss_fn(leaves)
    if not isinstance(out, Var):
        # loss does not depend on any parameter
        return float(np.asarray(out)), ParamVector(params.layout)
    if out.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {out.value.shape}")
    loss = float(out.value.reshape(()))
    if not np.isfinite(loss):
        raise NonFiniteError(f"loss is not finite ({loss})")
    grads = tape.backward(out)
    data = np.zeros(params.layout.size)
    for name, off, shape in params.layout.entries:
        g = grads[leaves[name].index]
        if g is None:
            continue
        g = np.asarray(g, dtype=np.float64).ravel()
        if not np.all(np.isfinite(g)):
            bad = int(np.flatnonzero(~np.isfinite(g))[0])
            idx = [int(i) for i in np.unravel_index(bad, shape)] if shape else []
            raise NonFiniteError(f"non-finite gradient for parameter {name}{idx}")
        data[off:off + g.size] = g
    return loss, ParamVector(params.layout, data)
