"""Hot numeric kernels.

The numba path is used when numba imports and ``PINNRAY_NUMBA`` is not set
to ``0``; otherwise the pure-numpy reference path is used.  Both paths share
signatures and are cross-checked in the test suite.
"""
import os

from . import _numpy as numpy_backend

try:
    from . import _numba as numba_backend
except ImportError:  # pragma: no cover - numba missing
    numba_backend = None


def _select():
    flag = os.environ.get("PINNRAY_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off") or numba_backend is None:
        return numpy_backend
    return numba_backend


backend = _select()
BACKEND_NAME = "numba" if backend is numba_backend and numba_backend is not None else "numpy"

points_in_polygon = backend.points_in_polygon
cst_element_stiffness = backend.cst_element_stiffness
locate_points = backend.locate_points
jet_tanh_fwd = backend.jet_tanh_fwd
jet_tanh_bwd = backend.jet_tanh_bwd
jet_tanh_gate_fwd = backend.jet_tanh_gate_fwd
jet_tanh_gate_bwd = backend.jet_tanh_gate_bwd

__all__ = [
    "BACKEND_NAME",
    "cst_element_stiffness",
    "jet_tanh_bwd",
    "jet_tanh_fwd",
    "jet_tanh_gate_bwd",
    "jet_tanh_gate_fwd",
    "locate_points",
    "numba_backend",
    "numpy_backend",
    "points_in_polygon",
]
