"""Marker ingestion, error metrics and field export.

Marker measurements arrive as CSV rows ``marker_id, phase, frame_index, px,
py`` (phase is ``initial`` or ``final``).  Frames are averaged per marker and
phase, mapped to millimetres with an affine pixel-to-world transform, and
differenced to give measured displacements.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .elasticity import MaterialModel, strain_from_jacobian, stress_from_strain
from .errors import ConfigurationError

log = logging.getLogger(__name__)

PHASES = ("initial", "final")
COMPONENTS = ("u", "v", "disp")
FIELD_COLUMNS = ["x", "y", "u", "v", "eps_xx", "eps_yy", "eps_xy", "sig_xx", "sig_yy", "sig_xy"]
EXPECTED_MARKERS = 9


class MarkerDataError(ValueError):
    pass


@dataclass(frozen=True)
class PixelToWorld:
    """world = M[:, :2] @ pixel + M[:, 2]."""

    matrix: np.ndarray
    residual_rms: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"transform must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) < 1e-15:
            raise ValueError("transform linear part is singular")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "PixelToWorld":
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def apply(self, pixels) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        return p @ self.matrix[:, :2].T + self.matrix[:, 2]


def fit_pixel_to_world(pixels, world) -> PixelToWorld:
    """Least-squares affine map from pixel to world coordinates.

    Needs at least three correspondences that are not collinear.  The RMS of
    the world-space residual norms is stored on the result.
    """
    px = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    wd = np.atleast_2d(np.asarray(world, dtype=np.float64))
    if px.shape != wd.shape or px.shape[1] != 2:
        raise ValueError(f"pixel and world arrays must both be (k, 2); got {px.shape} and {wd.shape}")
    if len(px) < 3:
        raise ValueError(f"need at least 3 correspondences, got {len(px)}")
    centred = px - px.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise ValueError("correspondence pixels are collinear")
    A = np.column_stack([px, np.ones(len(px))])
    coef, *_ = np.linalg.lstsq(A, wd, rcond=None)
    resid = A @ coef - wd
    rms = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    return PixelToWorld(coef.T, rms)


def read_correspondences(path) -> tuple[np.ndarray, np.ndarray]:
    """CSV with columns px, py, x, y."""
    rows = _read_csv(path, ("px", "py", "x", "y"))
    pix = np.array([[float(r["px"]), float(r["py"])] for r in rows])
    wld = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    return pix, wld


@dataclass
class MarkerObservation:
    marker_id: int
    phase: str
    frames: np.ndarray   # (k, 2) pixel coordinates

    def __post_init__(self):
        if self.phase not in PHASES:
            raise MarkerDataError(f"unknown phase {self.phase!r}")
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        if self.frames.shape[0] < 1 or self.frames.shape[1] != 2:
            raise MarkerDataError(f"marker {self.marker_id} ({self.phase}) needs at least one (px, py) frame")

    def mean_pixel(self) -> np.ndarray:
        return self.frames.mean(axis=0)


def _read_csv(path, required: Sequence[str]) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise MarkerDataError(f"{path}: missing columns {missing}")
        return list(reader)


def read_markers(path) -> dict[str, list[MarkerObservation]]:
    """Group marker rows into one observation per (phase, marker_id)."""
    rows = _read_csv(path, ("marker_id", "phase", "frame_index", "px", "py"))
    grouped: dict[tuple[str, int], list[tuple[int, float, float]]] = {}
    for lineno, r in enumerate(rows, start=2):
        try:
            key = (r["phase"].strip(), int(r["marker_id"]))
            grouped.setdefault(key, []).append((int(r["frame_index"]), float(r["px"]), float(r["py"])))
        except ValueError as e:
            raise MarkerDataError(f"{path}: line {lineno}: {e}") from None
    out: dict[str, list[MarkerObservation]] = {p: [] for p in PHASES}
    for (phase, mid), frames in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if phase not in PHASES:
            raise MarkerDataError(f"{path}: unknown phase {phase!r}")
        frames.sort()
        out[phase].append(MarkerObservation(mid, phase, [(x, y) for _, x, y in frames]))
    return out


def write_markers(path, observations: Iterable[MarkerObservation]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["marker_id", "phase", "frame_index", "px", "py"])
        for obs in observations:
            for k, (px, py) in enumerate(obs.frames.tolist()):
                w.writerow([obs.marker_id, obs.phase, k, repr(px), repr(py)])


@dataclass
class MarkerDisplacements:
    marker_ids: np.ndarray     # (k,)
    positions: np.ndarray      # (k, 2) initial world position, mm
    displacements: np.ndarray  # (k, 2) mm

    def __post_init__(self):
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.displacements))):
            raise MarkerDataError("marker displacements must be finite")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["marker_id", "x", "y", "u", "v"])
            for mid, (x, y), (u, v) in zip(self.marker_ids.tolist(), self.positions.tolist(),
                                           self.displacements.tolist()):
                w.writerow([mid, repr(x), repr(y), repr(u), repr(v)])

    @classmethod
    def from_csv(cls, path) -> "MarkerDisplacements":
        rows = _read_csv(path, ("marker_id", "x", "y", "u", "v"))
        return cls(np.array([int(r["marker_id"]) for r in rows], dtype=np.int64),
                   np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2),
                   np.array([[float(r["u"]), float(r["v"])] for r in rows]).reshape(-1, 2))


def _by_id(obs: Sequence[MarkerObservation], phase: str) -> dict[int, MarkerObservation]:
    out = {}
    for o in obs:
        if o.marker_id in out:
            raise MarkerDataError(f"marker {o.marker_id} appears twice in phase {phase}")
        out[o.marker_id] = o
    return out


def smooth_and_difference(initial: Sequence[MarkerObservation], final: Sequence[MarkerObservation],
                          transform: PixelToWorld) -> MarkerDisplacements:
    """Frame-averaged world positions per phase, differenced final minus initial."""
    a, b = _by_id(initial, "initial"), _by_id(final, "final")
    only_a = sorted(set(a) - set(b))
    only_b = sorted(set(b) - set(a))
    if only_a or only_b:
        raise MarkerDataError(f"markers missing a phase: initial only {only_a}, final only {only_b}")
    ids = np.array(sorted(a), dtype=np.int64)
    p0 = transform.apply(np.array([a[i].mean_pixel() for i in ids]).reshape(-1, 2))
    p1 = transform.apply(np.array([b[i].mean_pixel() for i in ids]).reshape(-1, 2))
    return MarkerDisplacements(ids, p0, p1 - p0)


def absolute_error(estimate, measured) -> float:
    """|du| + |dv| in mm."""
    (ue, ve), (um, vm) = estimate, measured
    return abs(float(ue) - float(um)) + abs(float(ve) - float(vm))


def per_marker_ae(estimates, measured) -> np.ndarray:
    e = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    m = np.atleast_2d(np.asarray(measured, dtype=np.float64))
    if e.shape != m.shape:
        raise ValueError(f"estimates {e.shape} and measurements {m.shape} differ in shape")
    return np.abs(e - m).sum(axis=1)


def mean_absolute_error(estimates, measured, component: str = "disp") -> float:
    """Mean over markers of |du| (``u``), |dv| (``v``) or |du| + |dv| (``disp``)."""
    e = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    m = np.atleast_2d(np.asarray(measured, dtype=np.float64))
    if e.shape != m.shape:
        raise ValueError(f"estimates {e.shape} and measurements {m.shape} differ in shape")
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}, got {component!r}")
    if len(e) == 0:
        raise ValueError("no markers")
    err = np.abs(e - m)
    if component == "u":
        return float(err[:, 0].mean())
    if component == "v":
        return float(err[:, 1].mean())
    return float(err.sum(axis=1).mean())


@dataclass
class MethodMetrics:
    method: str
    mae_u: float
    mae_v: float
    mae_disp: float
    per_marker_ae: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"method": self.method, "mae_u": self.mae_u, "mae_v": self.mae_v,
                "mae_disp": self.mae_disp, "per_marker_ae": list(self.per_marker_ae)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MethodMetrics":
        return cls(d["method"], float(d["mae_u"]), float(d["mae_v"]), float(d["mae_disp"]),
                   [float(x) for x in d["per_marker_ae"]])


def method_metrics(method: str, estimates, measured) -> MethodMetrics:
    n = len(np.atleast_2d(measured))
    if n != EXPECTED_MARKERS:
        log.warning("expected %d markers, got %d; metrics use the markers provided", EXPECTED_MARKERS, n)
    return MethodMetrics(
        method,
        mean_absolute_error(estimates, measured, "u"),
        mean_absolute_error(estimates, measured, "v"),
        mean_absolute_error(estimates, measured, "disp"),
        per_marker_ae(estimates, measured).tolist(),
    )


def write_metrics(path, metrics: Sequence[MethodMetrics]) -> None:
    data = [m.to_dict() for m in metrics]
    Path(path).write_text(json.dumps(data if len(data) != 1 else data[0], indent=2))


def read_metrics(path) -> list[MethodMetrics]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [MethodMetrics.from_dict(d) for d in data]


def comparison_table(metrics: Sequence[MethodMetrics], digits: int = 3) -> str:
    """Plain-text table: one column per method, rows u, v and disp."""
    names = [m.method for m in metrics]
    width = max([8] + [len(n) for n in names])
    lines = ["MAE (mm)".ljust(8) + "".join(n.rjust(width + 2) for n in names)]
    for row, attr in (("u", "mae_u"), ("v", "mae_v"), ("disp", "mae_disp")):
        cells = "".join(f"{getattr(m, attr):.{digits}f}".rjust(width + 2) for m in metrics)
        lines.append(row.ljust(8) + cells)
    return "\n".join(lines)


# field export ---------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigurationError("grid needs nx, ny >= 1")

    @classmethod
    def covering(cls, bbox, spacing: float) -> "GridSpec":
        xmin, ymin, xmax, ymax = bbox
        nx = max(1, int(math.floor((xmax - xmin) / spacing)) + 1)
        ny = max(1, int(math.floor((ymax - ymin) / spacing)) + 1)
        return cls(xmin, ymin, xmin + (nx - 1) * spacing, ymin + (ny - 1) * spacing, nx, ny)

    def points(self) -> np.ndarray:
        xs = np.linspace(self.xmin, self.xmax, self.nx)
        ys = np.linspace(self.ymin, self.ymax, self.ny)
        X, Y = np.meshgrid(xs, ys)
        return np.column_stack([X.ravel(), Y.ravel()])


def network_fields(net, points, material: MaterialModel, domain=None):
    """Rows of FIELD_COLUMNS for a displacement network; NaN outside ``domain``."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if domain is None:
        inside = np.ones(len(pts), dtype=bool)
    else:
        # points on the outline count as material, as in the FEM export
        inside = domain.contains(pts) | (domain.distance_to_boundary(pts) <= 1e-9)
    out = np.full((len(pts), len(FIELD_COLUMNS)), np.nan)
    out[:, :2] = pts
    if inside.any():
        u, v, ux, uy, vx, vy = net.jacobian(pts[inside])
        eps = strain_from_jacobian(ux, uy, vx, vy)
        sig = stress_from_strain(eps, material)
        out[inside, 2:] = np.column_stack([u, v, eps.xx, eps.yy, eps.xy, sig.xx, sig.yy, sig.xy])
    return out, inside


def fem_fields(sol, points, tol: float = 1e-9):
    """Rows of FIELD_COLUMNS from a FEM solution; NaN outside the mesh."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    mesh = sol.mesh
    owner, bary = kernels.locate_points(pts, np.ascontiguousarray(mesh.nodes),
                                        np.ascontiguousarray(mesh.triangles), tol)
    inside = owner >= 0
    out = np.full((len(pts), len(FIELD_COLUMNS)), np.nan)
    out[:, :2] = pts
    if inside.any():
        own = owner[inside]
        disp = np.einsum("kj,kjc->kc", bary[inside], sol.displacement[mesh.triangles[own]])
        out[inside, 2:4] = disp
        out[inside, 4:7] = sol.strain[own]
        out[inside, 7:10] = sol.stress[own]
    return out, inside


def export_fields(source, points, path, material: MaterialModel | None = None, domain=None,
                  keep_outside: bool = False) -> int:
    """Write sampled fields to CSV and return the number of rows written.

    ``source`` is a :class:`~pinnray.network.DisplacementNet` (needs
    ``material``) or a :class:`~pinnray.fem.FemSolution`.  Points outside the
    material are dropped, or kept with empty value cells when
    ``keep_outside`` is set.
    """
    from .fem import FemSolution

    if isinstance(source, FemSolution):
        rows, inside = fem_fields(source, points)
    else:
        if material is None:
            raise ConfigurationError("network export needs a material model")
        rows, inside = network_fields(source, points, material, domain)
    n = 0
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_COLUMNS)
        for row, ok in zip(rows.tolist(), inside.tolist()):
            if ok:
                w.writerow([repr(x) for x in row])
            elif keep_outside:
                w.writerow([repr(row[0]), repr(row[1])] + [""] * (len(FIELD_COLUMNS) - 2))
            else:
                continue
            n += 1
    return n
