"""Constant-strain-triangle solver for linear plane elastostatics.

Used as the finite-element baseline and as the brute-force oracle in the
test suite.  Dirichlet conditions are imposed by eliminating the
constrained degrees of freedom; the reduced system is factorized directly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .elasticity import MaterialModel, Strain2, Stress2, energy_density
from .errors import AssemblyError, SingularSystemError
from .geometry.mesh import DEGENERATE_AREA, TriangleMesh


@dataclass
class FemProblem:
    mesh: TriangleMesh
    material: MaterialModel
    dirichlet: dict = field(default_factory=dict)   # node -> (u, v); None leaves a component free
    loads: dict = field(default_factory=dict)       # node -> (fx, fy), N per mm thickness

    def constrained_dofs(self) -> tuple[np.ndarray, np.ndarray]:
        dofs, vals = [], []
        n = len(self.mesh.nodes)
        for node, (u, v) in self.dirichlet.items():
            if not 0 <= node < n:
                raise IndexError(f"Dirichlet node {node} out of range")
            if u is not None:
                dofs.append(2 * node)
                vals.append(u)
            if v is not None:
                dofs.append(2 * node + 1)
                vals.append(v)
        order = np.argsort(dofs, kind="stable")
        return np.asarray(dofs, dtype=np.int64)[order], np.asarray(vals, dtype=np.float64)[order]

    def load_vector(self) -> np.ndarray:
        f = np.zeros(2 * len(self.mesh.nodes))
        for node, (fx, fy) in self.loads.items():
            f[2 * node] += fx
            f[2 * node + 1] += fy
        return f


def d_engineering(mat: MaterialModel) -> np.ndarray:
    """Constitutive matrix acting on [exx, eyy, gamma_xy]."""
    d = mat.constitutive_matrix()
    d[2, 2] *= 0.5
    return d


def element_matrices(mesh: TriangleMesh, mat: MaterialModel):
    ke, area, bmat = kernels.cst_element_stiffness(
        np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(mesh.triangles), d_engineering(mat))
    bad = np.flatnonzero(area <= DEGENERATE_AREA)
    if bad.size:
        raise AssemblyError(f"degenerate or inverted triangle at element {int(bad[0])} "
                            f"(area {area[bad[0]]:.3g} mm^2)")
    return ke, area, bmat


def assemble(problem: FemProblem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Global stiffness K (symmetric, CSR) and load vector f."""
    mesh = problem.mesh
    ke, _, _ = element_matrices(mesh, problem.material)
    dof = np.empty((len(mesh.triangles), 6), dtype=np.int64)
    dof[:, 0::2] = 2 * mesh.triangles
    dof[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    ndof = 2 * len(mesh.nodes)
    K = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    K.sum_duplicates()
    return K, problem.load_vector()


def rigid_modes(nodes: np.ndarray) -> np.ndarray:
    """(2n, 3) basis: x-translation, y-translation, rotation about the centroid."""
    n = len(nodes)
    c = nodes - nodes.mean(axis=0)
    R = np.zeros((2 * n, 3))
    R[0::2, 0] = 1.0
    R[1::2, 1] = 1.0
    R[0::2, 2] = -c[:, 1]
    R[1::2, 2] = c[:, 0]
    return R


_MODE_NAMES = ("x-translation", "y-translation", "rotation")


def _unconstrained_modes(nodes: np.ndarray, cdofs: np.ndarray) -> list[str]:
    R = rigid_modes(nodes)[cdofs]
    if R.shape[0] == 0:
        return list(_MODE_NAMES)
    _, s, vt = np.linalg.svd(R, full_matrices=True)
    scale = max(1.0, float(np.abs(R).max()))
    rank = int(np.sum(s > 1e-10 * scale))
    out = []
    for v in vt[rank:]:
        k = int(np.argmax(np.abs(v)))
        out.append(_MODE_NAMES[k])
    return out


@dataclass
class FemSolution:
    mesh: TriangleMesh
    material: MaterialModel
    displacement: np.ndarray    # (n, 2)
    strain: np.ndarray          # (m, 3) exx, eyy, exy (tensor shear)
    stress: np.ndarray          # (m, 3)
    area: np.ndarray            # (m,)

    @property
    def u(self) -> np.ndarray:
        return self.displacement[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.displacement[:, 1]

    def element_energy(self) -> np.ndarray:
        eps = Strain2(*self.strain.T)
        sig = Stress2(*self.stress.T)
        return self.area * energy_density(sig, eps)

    def strain_energy(self) -> float:
        return float(self.element_energy().sum())

    def centroids(self) -> np.ndarray:
        return self.mesh.nodes[self.mesh.triangles].mean(axis=1)


def recover_fields(mesh: TriangleMesh, mat: MaterialModel, disp: np.ndarray):
    _, area, bmat = element_matrices(mesh, mat)
    ue = np.empty((len(mesh.triangles), 6))
    ue[:, 0::2] = disp[mesh.triangles, 0]
    ue[:, 1::2] = disp[mesh.triangles, 1]
    e = np.einsum("mij,mj->mi", bmat, ue)
    e[:, 2] *= 0.5  # engineering -> tensor shear
    stress = e @ mat.constitutive_matrix().T
    return e, stress, area


def solve(problem: FemProblem) -> FemSolution:
    mesh = problem.mesh
    K, f = assemble(problem)
    ndof = K.shape[0]
    cdofs, cvals = problem.constrained_dofs()
    missing = _unconstrained_modes(mesh.nodes, cdofs)
    if missing:
        raise SingularSystemError(f"insufficient Dirichlet constraints; unconstrained rigid modes: "
                                  f"{', '.join(missing)}")
    free = np.setdiff1d(np.arange(ndof), cdofs)
    u = np.zeros(ndof)
    u[cdofs] = cvals
    Kff = K[free][:, free].tocsc()
    rhs = f[free] - K[free][:, cdofs] @ cvals
    try:
        lu = splu(Kff)
    except RuntimeError as e:
        raise SingularSystemError(f"stiffness factorization failed: {e}") from None
    u[free] = lu.solve(rhs)
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("solution is not finite; the mesh may contain disconnected parts")
    disp = u.reshape(-1, 2)
    strain, stress, area = recover_fields(mesh, problem.material, disp)
    return FemSolution(mesh, problem.material, disp, strain, stress, area)


def reactions(problem: FemProblem, sol: FemSolution) -> np.ndarray:
    """Nodal reaction forces K u - f, shape (n, 2); nonzero only at constrained dofs."""
    K, f = assemble(problem)
    return (K @ sol.displacement.ravel() - f).reshape(-1, 2)


def interpolate(sol: FemSolution, points, tol: float = 1e-9) -> np.ndarray:
    """Barycentric displacement at ``points`` (k, 2) -> (k, 2)."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    mesh = sol.mesh
    owner, bary = kernels.locate_points(pts, np.ascontiguousarray(mesh.nodes),
                                        np.ascontiguousarray(mesh.triangles), tol)
    if (owner < 0).any():
        i = int(np.flatnonzero(owner < 0)[0])
        cen = sol.centroids()
        j = int(np.argmin(((cen - pts[i]) ** 2).sum(axis=1)))
        raise ValueError(f"point {pts[i].tolist()} lies outside the mesh; nearest triangle {j} "
                         f"has centroid {cen[j].tolist()}")
    tri = mesh.triangles[owner]
    return np.einsum("kj,kjc->kc", bary, sol.displacement[tri])


def element_fields_at(sol: FemSolution, points, tol: float = 1e-9):
    """Element index, strain and stress for each point (constant per element)."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    owner, _ = kernels.locate_points(pts, np.ascontiguousarray(sol.mesh.nodes),
                                     np.ascontiguousarray(sol.mesh.triangles), tol)
    return owner, sol.strain[np.maximum(owner, 0)], sol.stress[np.maximum(owner, 0)]


def export_solution(sol: FemSolution, path) -> tuple[Path, Path]:
    """Write ``<stem>_nodes.csv`` (x,y,u,v) and ``<stem>_elements.csv`` (per element)."""
    path = Path(path)
    stem = path.with_suffix("")
    nodes_path = stem.parent / f"{stem.name}_nodes.csv"
    elems_path = stem.parent / f"{stem.name}_elements.csv"
    with nodes_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u", "v"])
        for (x, y), (u, v) in zip(sol.mesh.nodes.tolist(), sol.displacement.tolist()):
            w.writerow([repr(x), repr(y), repr(u), repr(v)])
    with elems_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xc", "yc", "eps_xx", "eps_yy", "eps_xy", "sig_xx", "sig_yy", "sig_xy"])
        for c, e, s in zip(sol.centroids().tolist(), sol.strain.tolist(), sol.stress.tolist()):
            w.writerow([repr(v) for v in (*c, *e, *s)])
    return nodes_path, elems_path


def finray_problem(mesh: TriangleMesh, material: MaterialModel, forced_at, forced_disp,
                   base_tag: str = "base") -> FemProblem:
    """Fixed base plus a prescribed displacement at the node nearest ``forced_at``."""
    dirichlet = {int(i): (0.0, 0.0) for i in mesh.tagged_nodes(base_tag)}
    if not dirichlet:
        raise SingularSystemError(f"mesh has no nodes tagged {base_tag!r}")
    k = mesh.nearest_node(forced_at)
    dirichlet[k] = (float(forced_disp[0]), float(forced_disp[1]))
    return FemProblem(mesh, material, dirichlet)
