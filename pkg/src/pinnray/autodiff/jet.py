"""Fused tape primitives on stacked dual numbers ("jets").

A jet is one array of shape ``(1 + d, n, k)``: slice 0 holds values and
slices 1..d hold tangents with respect to d input directions.  The
primitives below are the dual-number rules for an affine layer, tanh, and
the gate update ``A + tanh(P) * D``, recorded as single tape nodes with
hand-derived adjoints.  They compute exactly what the generic
:class:`~pinnray.autodiff.dual.Dual` operations compute, with far fewer
passes over memory; the elementwise work runs in :mod:`pinnray.kernels`.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from .tape import Var


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _tape_of(*xs):
    tapes = {id(x.tape): x.tape for x in xs if isinstance(x, Var)}
    if len(tapes) > 1:
        raise ValueError("cannot mix Vars from different tapes")
    return next(iter(tapes.values()), None)


def jet_from_dual(val: np.ndarray, tan: np.ndarray) -> np.ndarray:
    return np.concatenate([val[None], tan], axis=0)


def jet_affine(J, W, b):
    """Jet of ``J @ W + b``; the bias only touches the value slice."""
    jv, wv, bv = _val(J), _val(W), _val(b)
    nd, n, k = jv.shape
    flat = jv.reshape(nd * n, k)
    out = (flat @ wv).reshape(nd, n, wv.shape[1])
    out[0] += bv
    tape = _tape_of(J, W, b)
    if tape is None:
        return out
    parents, vjps = [], []
    if isinstance(J, Var):
        parents.append(J.index)
        vjps.append(lambda g: (g.reshape(nd * n, -1) @ wv.T).reshape(jv.shape))
    if isinstance(W, Var):
        parents.append(W.index)
        vjps.append(lambda g: flat.T @ g.reshape(nd * n, -1))
    if isinstance(b, Var):
        parents.append(b.index)
        vjps.append(lambda g: g[0].sum(axis=0))
    return tape._push("jet_affine", out, tuple(parents), tuple(vjps))


def jet_tanh(P):
    pv = _val(P)
    y = np.tanh(pv[0])
    out = kernels.jet_tanh_fwd(y, pv)
    if not isinstance(P, Var):
        return out
    return P.tape._push("jet_tanh", out, (P.index,), (lambda g: kernels.jet_tanh_bwd(g, y, pv),))


def jet_tanh_gate(P, A, D):
    """Jet of ``A + tanh(P) * D``."""
    pv, av, dv = _val(P), _val(A), _val(D)
    y = np.tanh(pv[0])
    out = kernels.jet_tanh_gate_fwd(y, pv, av, dv)
    tape = _tape_of(P, A, D)
    if tape is None:
        return out
    cache = {}

    def both(g):
        key = id(g)
        if key not in cache:
            cache.clear()
            cache[key] = kernels.jet_tanh_gate_bwd(g, y, pv, dv)
        return cache[key]

    parents, vjps = [], []
    if isinstance(P, Var):
        parents.append(P.index)
        vjps.append(lambda g: both(g)[0])
    if isinstance(A, Var):
        parents.append(A.index)
        vjps.append(lambda g: g)
    if isinstance(D, Var):
        parents.append(D.index)
        vjps.append(lambda g: both(g)[1])
    return tape._push("jet_tanh_gate", out, tuple(parents), tuple(vjps))
