from __future__ import annotations

import numpy as np

from ..errors import GeometryError
from .finray import Domain2D
from .mesh import TriangleMesh


def sample_collocation(source, n: int | None = None, seed: int = 0) -> np.ndarray:
    """Collocation points for the energy integral.

    A :class:`TriangleMesh` yields all of its nodes (``n`` is ignored).  A
    :class:`Domain2D` yields ``n`` uniform points over the material by
    rejection from the bounding box.
    """
    if isinstance(source, TriangleMesh):
        return source.nodes.copy()
    if not isinstance(source, Domain2D):
        raise TypeError(f"expected Domain2D or TriangleMesh, got {type(source).__name__}")
    if n is None or n <= 0:
        raise ValueError("n must be positive")
    if source.area <= 0:
        raise GeometryError("domain has no material area")
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = source.bbox
    frac = source.area / ((xmax - xmin) * (ymax - ymin))
    out = []
    have = 0
    while have < n:
        m = int((n - have) / frac * 1.2) + 64
        cand = rng.uniform((xmin, ymin), (xmax, ymax), size=(m, 2))
        keep = cand[source.contains(cand)]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


def sample_polyline(poly: np.ndarray, n: int) -> np.ndarray:
    """``n`` points evenly spaced by arc length, endpoints included."""
    if n < 2:
        raise ValueError("need at least 2 points")
    poly = np.asarray(poly, dtype=np.float64)
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(t, s, poly[:, 0]), np.interp(t, s, poly[:, 1])])


def sample_boundary(domain: Domain2D, edge_name: str, n: int) -> np.ndarray:
    if edge_name not in domain.edges:
        raise KeyError(f"unknown edge {edge_name!r}; known edges: {sorted(domain.edges)}")
    return sample_polyline(domain.edges[edge_name], n)
