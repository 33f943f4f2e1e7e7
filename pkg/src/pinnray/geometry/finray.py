"""Parametric 2-D Fin Ray outline.

Canonical layout (mm, base on y = 0)::

    T = (0, H) ______
         |            \\  tip segment, length L_tip, at L_angle from the front wall
         |             B
   front |             \\
   wall  |   ribs       \\ back wall
         |               \\
    (0,0) +---------------+ (L, 0)
                 base

The front (contact) wall is the vertical edge x = 0.  Each outer edge is
offset inward by its wall thickness (front: t_flex, back and tip: t_back,
base: t_rib) to get the interior cavity, which N horizontal ribs of
thickness t_rib split into N + 1 voids.  Rib centres are evenly spaced in
height between the top of the base wall and the top of the cavity.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..errors import GeometryError
from .. import kernels

EDGE_NAMES = ("base", "back", "tip", "front")


def polygon_area(poly: np.ndarray) -> float:
    """Signed shoelace area (positive for counter-clockwise)."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class FinRayParams:
    H: float = 90.0
    L: float = 30.0
    W: float = 20.0
    L_angle: float = 20.0
    L_tip: float = 20.0
    N: int = 4
    t_rib: float = 2.0
    t_flex: float = 2.0
    t_back: float = 2.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "N":
                if int(v) != v or v < 0:
                    raise GeometryError(f"N must be a non-negative integer, got {v}")
                object.__setattr__(self, "N", int(v))
            elif not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise GeometryError(f"{f.name} must be a positive length, got {v!r}")
        if not 0 < self.L_angle < 90:
            raise GeometryError(f"L_angle must lie in (0, 90) degrees, got {self.L_angle}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FinRayParams":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise GeometryError(f"unknown Fin Ray parameters: {sorted(unknown)}")
        missing = names - set(data)
        if missing:
            raise GeometryError(f"missing Fin Ray parameters: {sorted(missing)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "FinRayParams":
        return cls.from_json(Path(path).read_text())


@dataclass
class Domain2D:
    outer: np.ndarray                      # (n, 2) counter-clockwise, not closed
    holes: list = field(default_factory=list)   # clockwise rings
    edges: dict = field(default_factory=dict)   # name -> (k, 2) polyline

    @property
    def area(self) -> float:
        return polygon_area(self.outer) + sum(polygon_area(h) for h in self.holes)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        lo = self.outer.min(axis=0)
        hi = self.outer.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def rings(self) -> list[np.ndarray]:
        return [self.outer, *self.holes]

    def contains(self, points) -> np.ndarray:
        """Inside the outer ring and outside every hole (boundary undefined)."""
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        inside = kernels.points_in_polygon(pts, np.ascontiguousarray(self.outer))
        for h in self.holes:
            inside &= ~kernels.points_in_polygon(pts, np.ascontiguousarray(h))
        return inside

    def boundary_segments(self) -> np.ndarray:
        """All ring segments as an (s, 2, 2) array."""
        segs = [np.stack([r, np.roll(r, -1, axis=0)], axis=1) for r in self.rings()]
        return np.concatenate(segs, axis=0)

    def distance_to_boundary(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        segs = self.boundary_segments()
        a = segs[:, 0]
        d = segs[:, 1] - a
        dd = np.einsum("ij,ij->i", d, d)
        best = np.full(len(pts), np.inf)
        for start in range(0, len(pts), 2048):
            p = pts[start:start + 2048, None, :]
            t = np.clip(np.einsum("psj,sj->ps", p - a, d) / dd, 0.0, 1.0)
            q = a + t[..., None] * d
            dist = np.sqrt(((p - q) ** 2).sum(axis=-1)).min(axis=1)
            best[start:start + 2048] = dist
        return best

    def to_dict(self) -> dict:
        return {
            "outer": self.outer.tolist(),
            "holes": [h.tolist() for h in self.holes],
            "edges": {k: v.tolist() for k, v in self.edges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Domain2D":
        return cls(
            np.array(d["outer"], dtype=np.float64),
            [np.array(h, dtype=np.float64) for h in d["holes"]],
            {k: np.array(v, dtype=np.float64) for k, v in d["edges"].items()},
        )


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Domain2D:
    """Axis-aligned rectangle with edges named base, right, top, left."""
    outer = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
    edges = {
        "base": outer[[0, 1]],
        "right": outer[[1, 2]],
        "top": outer[[3, 2]],
        "left": outer[[0, 3]],
    }
    return Domain2D(outer, [], edges)


def _offset_line(p, q, t):
    # inward normal of a CCW edge is the left normal
    d = (q - p) / np.linalg.norm(q - p)
    n = np.array([-d[1], d[0]])
    return p + t * n, d


def _intersect(p1, d1, p2, d2):
    m = np.array([d1, -d2]).T
    if abs(np.linalg.det(m)) < 1e-14:
        raise GeometryError("parallel adjacent walls")
    s = np.linalg.solve(m, p2 - p1)
    return p1 + s[0] * d1


def _clip_band(poly: np.ndarray, ylo: float, yhi: float) -> np.ndarray:
    """Clip a convex CCW polygon to ylo <= y <= yhi (Sutherland-Hodgman)."""
    def clip(pts, keep, cross_y):
        out = []
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            ka, kb = keep(a), keep(b)
            if ka:
                out.append(a)
            if ka != kb:
                t = (cross_y - a[1]) / (b[1] - a[1])
                out.append(a + t * (b - a))
        return out

    pts = list(poly)
    pts = clip(pts, lambda p: p[1] >= ylo, ylo)
    if pts:
        pts = clip(pts, lambda p: p[1] <= yhi, yhi)
    return np.array(pts, dtype=np.float64).reshape(-1, 2)


def outer_outline(params: FinRayParams) -> np.ndarray:
    a = math.radians(params.L_angle)
    tip_top = np.array([0.0, params.H])
    back_top = np.array([params.L_tip * math.sin(a), params.H - params.L_tip * math.cos(a)])
    return np.array([[0.0, 0.0], [params.L, 0.0], back_top, tip_top], dtype=np.float64)


def _check_convex(poly: np.ndarray, what: str) -> None:
    n = len(poly)
    for i in range(n):
        a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= 0:
            raise GeometryError(f"{what} is not a convex counter-clockwise outline at vertex {i}")


def build_finray(params: FinRayParams) -> Domain2D:
    outer = outer_outline(params)
    if outer[2, 1] <= 0 or outer[2, 0] >= params.L:
        raise GeometryError("tip segment does not fit: L_tip * cos(L_angle) must be < H and "
                            "L_tip * sin(L_angle) < L")
    _check_convex(outer, "outer outline")

    thickness = [params.t_rib, params.t_back, params.t_back, params.t_flex]
    lines = [_offset_line(outer[i], outer[(i + 1) % 4], thickness[i]) for i in range(4)]
    inner = np.array([_intersect(*lines[i - 1], *lines[i]) for i in range(4)])
    # inner edges must keep the direction of their outer edges, otherwise walls overlap
    for i in range(4):
        e_out = outer[(i + 1) % 4] - outer[i]
        e_in = inner[(i + 1) % 4] - inner[i]
        if np.dot(e_out, e_in) <= 1e-9:
            raise GeometryError(
                f"walls overlap: wall thicknesses (t_flex={params.t_flex}, t_back={params.t_back}, "
                f"t_rib={params.t_rib}) leave no cavity along the {EDGE_NAMES[i]} edge"
            )
    if polygon_area(inner) <= 0:
        raise GeometryError("walls overlap: cavity has no area")

    ylo, yhi = float(inner[:, 1].min()), float(inner[:, 1].max())
    n, t = params.N, params.t_rib
    pitch = (yhi - ylo) / (n + 1)
    if n and pitch <= t:
        raise GeometryError(f"ribs overlap: {n} ribs of thickness {t} need a cavity taller than "
                            f"{(n + 1) * t:.3g} mm, got {yhi - ylo:.3g} mm")
    cuts = [ylo]
    for k in range(1, n + 1):
        yc = ylo + k * pitch
        cuts += [yc - t / 2, yc + t / 2]
    cuts.append(yhi)

    holes = []
    for k in range(n + 1):
        void = _clip_band(inner, cuts[2 * k], cuts[2 * k + 1])
        if len(void) < 3 or polygon_area(void) <= 1e-9:
            raise GeometryError(f"void {k} between ribs is degenerate")
        holes.append(void[::-1].copy())  # clockwise

    edges = {name: outer[[i, (i + 1) % 4]].copy() for i, name in enumerate(EDGE_NAMES)}
    edges["front"] = edges["front"][::-1].copy()  # bottom to top
    return Domain2D(outer, holes, edges)


def marker_locations(params: FinRayParams, count: int = 9) -> np.ndarray:
    """Marker sites on the back-wall centreline, ordered from base to tip.

    The markers sit at fractions i / (count + 1) of the back wall's length,
    half a wall thickness inside the outer surface.
    """
    outer = outer_outline(params)
    p, q = outer[1], outer[2]
    d = (q - p) / np.linalg.norm(q - p)
    n_in = np.array([-d[1], d[0]])
    s = np.arange(1, count + 1) / (count + 1)
    return p + s[:, None] * (q - p) + 0.5 * params.t_back * n_in


def forced_point(params: FinRayParams, height: float = 35.0) -> np.ndarray:
    """Point on the outer front wall at the given height."""
    if not 0 <= height <= params.H:
        raise GeometryError(f"forced point height {height} lies outside the front wall")
    return np.array([0.0, height])
