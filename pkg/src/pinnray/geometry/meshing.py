"""Small conforming triangulator for straight-edged domains.

Not a general mesher: it places boundary points at spacing <= h, a
triangular lattice of interior points kept clear of the boundary, runs a
Delaunay triangulation and discards triangles whose centroid is not in the
material.  Keeping interior points more than half a boundary spacing away
from every boundary segment leaves each segment's diametral circle empty,
so every boundary segment appears as a Delaunay edge and the result
conforms to the domain.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import Delaunay

from ..errors import GeometryError
from .finray import Domain2D
from .mesh import TriangleMesh


def _edge_name(domain: Domain2D, a: np.ndarray, b: np.ndarray) -> str | None:
    for name, poly in domain.edges.items():
        for p, q in zip(poly[:-1], poly[1:]):
            if (np.allclose(p, a) and np.allclose(q, b)) or (np.allclose(p, b) and np.allclose(q, a)):
                return name
    return None


def _split_params(a: np.ndarray, b: np.ndarray, extra: np.ndarray) -> dict[float, np.ndarray]:
    """Parameter in (0, 1) -> point, for the ``extra`` points lying on segment a-b."""
    if not len(extra):
        return {}
    ab = b - a
    t = (extra - a) @ ab / (ab @ ab)
    foot = a + t[:, None] * ab
    on = (np.linalg.norm(extra - foot, axis=1) < 1e-9) & (t > 1e-9) & (t < 1 - 1e-9)
    return {float(ti): p for ti, p in zip(t[on], extra[on])}


def triangulate(domain: Domain2D, h: float, clearance: float = 0.6, boundary_points=()) -> TriangleMesh:
    """Triangle mesh of ``domain`` with target edge length ``h`` (mm).

    Boundary edges are tagged with the domain's edge names; segments not
    covered by a named edge get ``"outer"`` or ``"hole"``.  Each point of
    ``boundary_points`` that lies on the boundary becomes a mesh node.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    extra = np.asarray(boundary_points, dtype=np.float64).reshape(-1, 2)
    pts: list = []
    edges: list = []
    tags: list = []
    for ring_no, ring in enumerate(domain.rings()):
        start = len(pts)
        n = len(ring)
        for i in range(n):
            a, b = ring[i], ring[(i + 1) % n]
            name = _edge_name(domain, a, b) or ("outer" if ring_no == 0 else "hole")
            exact = _split_params(a, b, extra)
            knots = [0.0, *sorted(exact), 1.0]
            seg_len = np.linalg.norm(b - a)
            ts = []
            for t0, t1 in zip(knots[:-1], knots[1:]):
                k = max(1, math.ceil((t1 - t0) * seg_len / h - 1e-9))
                ts.extend(t0 + (t1 - t0) * j / k for j in range(k))
            for j, t in enumerate(ts):
                idx = len(pts)
                # requested points are placed verbatim, not re-derived from t
                pts.append(exact[t].copy() if t in exact else a + (b - a) * t)
                nxt = idx + 1 if not (i == n - 1 and j == len(ts) - 1) else start
                edges.append((idx, nxt))
                tags.append(name)
    bpts = np.array(pts)

    xmin, ymin, xmax, ymax = domain.bbox
    dy = h * math.sqrt(3) / 2
    rows = []
    for r, y in enumerate(np.arange(ymin, ymax + dy, dy)):
        xs = np.arange(xmin + (h / 2 if r % 2 else 0.0), xmax + h, h)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    lattice = np.concatenate(rows)
    lattice = lattice[domain.contains(lattice)]
    if len(lattice):
        lattice = lattice[domain.distance_to_boundary(lattice) > clearance * h]

    allpts = np.concatenate([bpts, lattice]) if len(lattice) else bpts
    tri = Delaunay(allpts).simplices
    cen = allpts[tri].mean(axis=1)
    tri = tri[domain.contains(cen)]
    mesh = TriangleMesh(allpts, tri, np.array(edges), tags)
    bad = mesh.degenerate_triangles()
    if bad.size:
        mesh = TriangleMesh(allpts, np.delete(mesh.triangles, bad, axis=0), mesh.edges, mesh.edge_tags)
    if abs(mesh.area - domain.area) > 1e-8 * abs(domain.area):
        raise GeometryError(
            f"triangulation does not conform (mesh area {mesh.area:.9g} vs domain {domain.area:.9g}); "
            "try a smaller h"
        )
    used = np.zeros(len(allpts), dtype=bool)
    used[mesh.triangles.ravel()] = True
    if not used.all():
        raise GeometryError("triangulation left unused nodes")
    return mesh


def structured_rectangle(x0: float, y0: float, x1: float, y1: float, nx: int, ny: int) -> TriangleMesh:
    """Rectangle split into nx * ny cells, each cut into two triangles.

    Diagonals alternate direction cell by cell.  Boundary edges are tagged
    base (y = y0), right, top and left.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = idx[j, i], idx[j, i + 1], idx[j + 1, i + 1], idx[j + 1, i]
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    edges, tags = [], []
    for i in range(nx):
        edges.append((idx[0, i], idx[0, i + 1]))
        tags.append("base")
        edges.append((idx[ny, i], idx[ny, i + 1]))
        tags.append("top")
    for j in range(ny):
        edges.append((idx[j, nx], idx[j + 1, nx]))
        tags.append("right")
        edges.append((idx[j, 0], idx[j + 1, 0]))
        tags.append("left")
    return TriangleMesh(nodes, np.array(tris), np.array(edges), tags)
