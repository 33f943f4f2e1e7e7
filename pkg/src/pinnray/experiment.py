"""Experiment bundles: one JSON file describing a complete run.

Sections
--------
geometry   ``{"kind": "finray", "params": {...}}`` (or ``"params_file"``),
           or ``{"kind": "rectangle", "bbox": [x0, y0, x1, y1]}``
material   MaterialModel fields
mesh       ``{"h": 0.35}``, ``{"structured": [nx, ny]}`` or ``{"path": "m.msh"}``
network    NetworkConfig fields
points     ``n_collocation``, ``collocation_source`` (domain | mesh),
           ``n_boundary`` (per edge condition), ``seed``
boundary   list of conditions; each names an ``edge`` (``"*"`` = all edges)
           or a ``point``, with either ``disp: [u, v]`` or
           ``affine: [[a, b, c], [d, e, f]]`` meaning u = a x + b y + c
markers    ``locations`` ("finray" or a list of points) and optionally
           measured data: ``displacements`` (marker_id,x,y,u,v CSV) or
           ``observations`` + ``correspondences`` (raw pixel CSVs)
train      TrainConfig fields
out        output directory

Relative paths are resolved against the directory holding the JSON file.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .elasticity import MaterialModel
from .errors import ConfigurationError
from .evaluation import (
    MarkerDisplacements,
    fit_pixel_to_world,
    read_correspondences,
    read_markers,
    smooth_and_difference,
)
from .geometry import (
    Domain2D,
    FinRayParams,
    TriangleMesh,
    build_finray,
    marker_locations,
    read_mesh,
    rectangle,
    sample_boundary,
    sample_collocation,
    structured_rectangle,
    triangulate,
)
from .network import NetworkConfig
from .training import PointSets, TrainConfig

SECTIONS = ("name", "geometry", "material", "mesh", "network", "points", "boundary", "markers", "train", "out")


@dataclass
class ExperimentSpec:
    name: str = "experiment"
    geometry: dict = field(default_factory=lambda: {"kind": "finray", "params": asdict(FinRayParams())})
    material: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=lambda: {"h": 0.35})
    network: dict = field(default_factory=dict)
    points: dict = field(default_factory=dict)
    boundary: list = field(default_factory=list)
    markers: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    out: str = "runs/experiment"
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in SECTIONS}

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentSpec":
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ConfigurationError(f"unknown experiment sections: {sorted(unknown)}")
        spec = cls(**{k: copy.deepcopy(v) for k, v in d.items()}, base_dir=Path(base_dir))
        spec.validate()
        return spec

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, base_dir=".") -> "ExperimentSpec":
        return cls.from_dict(json.loads(text), base_dir)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        path = Path(path)
        return cls.from_json(path.read_text(), path.parent)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def validate(self) -> None:
        self.material_model()
        self.network_config()
        self.train_config()
        kind = self.geometry.get("kind")
        if kind not in ("finray", "rectangle"):
            raise ConfigurationError(f"geometry kind must be 'finray' or 'rectangle', got {kind!r}")
        for bc in self.boundary:
            if ("edge" in bc) == ("point" in bc):
                raise ConfigurationError(f"boundary condition needs exactly one of 'edge' or 'point': {bc}")
            if ("disp" in bc) == ("affine" in bc):
                raise ConfigurationError(f"boundary condition needs exactly one of 'disp' or 'affine': {bc}")

    # builders ---------------------------------------------------------------
    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_dir(self) -> Path:
        return self.resolve(self.out)

    def material_model(self) -> MaterialModel:
        return MaterialModel(**self.material)

    def network_config(self) -> NetworkConfig:
        return NetworkConfig(**self.network)

    def train_config(self, assimilation: bool = False) -> TrainConfig:
        d = dict(self.train)
        d["assimilation_enabled"] = assimilation
        return TrainConfig.from_dict(d)

    def finray_params(self) -> FinRayParams:
        g = self.geometry
        if "params_file" in g:
            return FinRayParams.load(self.resolve(g["params_file"]))
        return FinRayParams.from_json(json.dumps(g.get("params", asdict(FinRayParams()))))

    def domain(self) -> Domain2D:
        if self.geometry["kind"] == "finray":
            return build_finray(self.finray_params())
        x0, y0, x1, y1 = (float(v) for v in self.geometry["bbox"])
        return rectangle(x0, y0, x1, y1)

    def point_conditions(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(np.asarray(bc["point"], dtype=np.float64), _target(bc, np.asarray([bc["point"]]))[0])
                for bc in self.boundary if "point" in bc]

    def build_mesh(self, domain: Domain2D | None = None) -> TriangleMesh:
        m = self.mesh
        if "path" in m:
            return read_mesh(self.resolve(m["path"]))
        domain = domain or self.domain()
        if "structured" in m:
            if self.geometry["kind"] != "rectangle":
                raise ConfigurationError("structured meshes are only available for rectangles")
            nx, ny = m["structured"]
            x0, y0, x1, y1 = domain.bbox
            return structured_rectangle(x0, y0, x1, y1, int(nx), int(ny))
        if "h" not in m:
            raise ConfigurationError("mesh section needs 'h', 'structured' or 'path'")
        pts = [p for p, _ in self.point_conditions()]
        return triangulate(domain, float(m["h"]), boundary_points=pts)

    def marker_sites(self) -> np.ndarray | None:
        loc = self.markers.get("locations")
        if loc is None:
            return None
        if loc == "finray":
            return marker_locations(self.finray_params())
        return np.asarray(loc, dtype=np.float64).reshape(-1, 2)

    def measured_markers(self, override=None) -> MarkerDisplacements | None:
        if override is not None:
            return MarkerDisplacements.from_csv(override)
        mk = self.markers
        if mk.get("displacements"):
            return MarkerDisplacements.from_csv(self.resolve(mk["displacements"]))
        if mk.get("observations"):
            obs = read_markers(self.resolve(mk["observations"]))
            if mk.get("correspondences"):
                transform = fit_pixel_to_world(*read_correspondences(self.resolve(mk["correspondences"])))
            else:
                from .evaluation import PixelToWorld
                transform = PixelToWorld.identity()
            return smooth_and_difference(obs["initial"], obs["final"], transform)
        return None

    def point_sets(self, domain: Domain2D, mesh: TriangleMesh | None = None,
                   measured: MarkerDisplacements | None = None) -> PointSets:
        pts = self.points
        seed = int(pts.get("seed", 0))
        if pts.get("collocation_source", "domain") == "mesh":
            colloc = sample_collocation(mesh if mesh is not None else self.build_mesh(domain))
        else:
            colloc = sample_collocation(domain, int(pts.get("n_collocation", 5000)), seed)
        n_b = int(pts.get("n_boundary", 1000))
        fixed, forced, targets = [], [], []
        for bc in self.boundary:
            if "point" in bc:
                p = np.asarray([bc["point"]], dtype=np.float64)
                forced.append(p)
                targets.append(_target(bc, p))
                continue
            names = list(domain.edges) if bc["edge"] == "*" else [bc["edge"]]
            for name in names:
                p = sample_boundary(domain, name, n_b)
                t = _target(bc, p)
                if not np.any(t):
                    fixed.append(p)
                else:
                    forced.append(p)
                    targets.append(t)
        cat = lambda xs: np.concatenate(xs) if xs else np.zeros((0, 2))  # noqa: E731
        kw = {}
        if measured is not None:
            kw = {"assimilation": measured.positions, "assimilation_disp": measured.displacements}
        return PointSets(colloc, cat(fixed), cat(forced), cat(targets), domain_area=domain.area, **kw)

    def dirichlet(self, mesh: TriangleMesh) -> dict:
        """Node -> (u, v) prescriptions for the FEM problem."""
        out: dict = {}
        for bc in self.boundary:
            if "point" in bc:
                nodes = np.array([mesh.nearest_node(bc["point"])])
            elif bc["edge"] == "*":
                nodes = np.unique(mesh.edges.ravel())
            else:
                nodes = mesh.tagged_nodes(bc["edge"])
                if len(nodes) == 0:
                    raise ConfigurationError(f"mesh has no edge tagged {bc['edge']!r}")
            t = _target(bc, mesh.nodes[nodes])
            for k, (u, v) in zip(np.asarray(nodes).tolist(), t.tolist()):
                out[int(k)] = (u, v)
        return out


def _target(bc: dict, points: np.ndarray) -> np.ndarray:
    if "disp" in bc:
        return np.tile(np.asarray(bc["disp"], dtype=np.float64), (len(points), 1))
    a = np.asarray(bc["affine"], dtype=np.float64)
    if a.shape != (2, 3):
        raise ConfigurationError("affine boundary data must be 2x3")
    return points @ a[:, :2].T + a[:, 2]
