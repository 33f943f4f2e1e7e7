"""Pure-numpy kernel implementations (reference path)."""
import numpy as np


def points_in_polygon(pts, poly):
    """Even-odd crossing test of each point against one closed polygon."""
    x = pts[:, 0][:, None]
    y = pts[:, 1][:, None]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (x < xcross)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def cst_element_stiffness(nodes, tris, d_eng):
    """Element matrices k_e = A * B^T D B for constant-strain triangles.

    Returns (ke (m, 6, 6), area (m,), bmat (m, 3, 6)); bmat maps
    [u1, v1, u2, v2, u3, v3] to [exx, eyy, gamma_xy] (engineering shear).
    Area is signed; callers check orientation.
    """
    p = nodes[tris]  # (m, 3, 2)
    x1, x2, x3 = p[:, 0, 0], p[:, 1, 0], p[:, 2, 0]
    y1, y2, y3 = p[:, 0, 1], p[:, 1, 1], p[:, 2, 1]
    two_a = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
    b = np.stack([y2 - y3, y3 - y1, y1 - y2], axis=1)
    c = np.stack([x3 - x2, x1 - x3, x2 - x1], axis=1)
    m = len(tris)
    bmat = np.zeros((m, 3, 6))
    bmat[:, 0, 0::2] = b
    bmat[:, 1, 1::2] = c
    bmat[:, 2, 0::2] = c
    bmat[:, 2, 1::2] = b
    safe = np.where(two_a != 0, two_a, 1.0)
    bmat /= safe[:, None, None]
    area = 0.5 * two_a
    ke = np.abs(area)[:, None, None] * np.einsum("mki,kl,mlj->mij", bmat, d_eng, bmat)
    return ke, area, bmat


def locate_points(pts, nodes, tris, tol):
    """Containing triangle and barycentric weights per point (-1 if none)."""
    n = len(pts)
    owner = np.full(n, -1, dtype=np.int64)
    bary = np.zeros((n, 3))
    p = nodes[tris]
    lo = p.min(axis=1) - tol
    hi = p.max(axis=1) + tol
    x1, y1 = p[:, 0, 0], p[:, 0, 1]
    x2, y2 = p[:, 1, 0], p[:, 1, 1]
    x3, y3 = p[:, 2, 0], p[:, 2, 1]
    det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
    for i in range(n):
        px, py = pts[i]
        cand = np.flatnonzero((lo[:, 0] <= px) & (px <= hi[:, 0]) & (lo[:, 1] <= py) & (py <= hi[:, 1]))
        if cand.size == 0:
            continue
        l1 = ((y2[cand] - y3[cand]) * (px - x3[cand]) + (x3[cand] - x2[cand]) * (py - y3[cand])) / det[cand]
        l2 = ((y3[cand] - y1[cand]) * (px - x3[cand]) + (x1[cand] - x3[cand]) * (py - y3[cand])) / det[cand]
        l3 = 1.0 - l1 - l2
        ok = np.flatnonzero((l1 >= -tol) & (l2 >= -tol) & (l3 >= -tol))
        if ok.size:
            j = ok[0]
            owner[i] = cand[j]
            bary[i] = (l1[j], l2[j], l3[j])
    return owner, bary


def jet_tanh_fwd(y, P):
    """Jet of tanh: value y = tanh(P[0]) (precomputed), tangents (1 - y^2) P[d]."""
    out = np.empty_like(P)
    out[0] = y
    out[1:] = (1.0 - y * y) * P[1:]
    return out


def jet_tanh_bwd(G, y, P):
    s = 1.0 - y * y
    gP = np.empty_like(P)
    gP[0] = G[0] * s - 2.0 * y * s * (G[1:] * P[1:]).sum(axis=0)
    gP[1:] = G[1:] * s
    return gP


def jet_tanh_gate_fwd(y, P, A, D):
    """H = A + Z * D with Z the tanh jet of P; jets stacked on axis 0."""
    s = 1.0 - y * y
    H = A + y * D
    H[1:] += (s * P[1:]) * D[0]
    return H


def jet_tanh_gate_bwd(G, y, P, D):
    """Adjoints (gP, gD) of jet_tanh_gate_fwd; the adjoint of A is G itself."""
    s = 1.0 - y * y
    Zt = s * P[1:]
    gZ0 = G[0] * D[0] + (G[1:] * D[1:]).sum(axis=0)
    gZt = G[1:] * D[0]
    gD = np.empty_like(D)
    gD[0] = G[0] * y + (G[1:] * Zt).sum(axis=0)
    gD[1:] = G[1:] * y
    gP = np.empty_like(P)
    gP[0] = gZ0 * s - 2.0 * y * s * (gZt * P[1:]).sum(axis=0)
    gP[1:] = gZt * s
    return gP, gD
