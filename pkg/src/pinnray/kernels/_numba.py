"""numba-compiled kernels; same contracts as the numpy reference path."""
import numpy as np
from numba import njit


@njit(cache=True)
def points_in_polygon(pts, poly):
    n = pts.shape[0]
    m = poly.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        x = pts[i, 0]
        y = pts[i, 1]
        inside = False
        j = m - 1
        for k in range(m):
            yk = poly[k, 1]
            yj = poly[j, 1]
            if (yk > y) != (yj > y):
                xk = poly[k, 0]
                xj = poly[j, 0]
                xcross = xk + (y - yk) * (xj - xk) / (yj - yk)
                if x < xcross:
                    inside = not inside
            j = k
        out[i] = inside
    return out


@njit(cache=True)
def cst_element_stiffness(nodes, tris, d_eng):
    m = tris.shape[0]
    ke = np.zeros((m, 6, 6))
    area = np.zeros(m)
    bmat = np.zeros((m, 3, 6))
    for e in range(m):
        i1, i2, i3 = tris[e, 0], tris[e, 1], tris[e, 2]
        x1, y1 = nodes[i1, 0], nodes[i1, 1]
        x2, y2 = nodes[i2, 0], nodes[i2, 1]
        x3, y3 = nodes[i3, 0], nodes[i3, 1]
        two_a = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)
        area[e] = 0.5 * two_a
        inv = 1.0 / two_a if two_a != 0.0 else 1.0
        b = (y2 - y3, y3 - y1, y1 - y2)
        c = (x3 - x2, x1 - x3, x2 - x1)
        for a in range(3):
            bmat[e, 0, 2 * a] = b[a] * inv
            bmat[e, 1, 2 * a + 1] = c[a] * inv
            bmat[e, 2, 2 * a] = c[a] * inv
            bmat[e, 2, 2 * a + 1] = b[a] * inv
        absa = abs(area[e])
        for i in range(6):
            for j in range(6):
                s = 0.0
                for k in range(3):
                    bk = bmat[e, k, i]
                    if bk == 0.0:
                        continue
                    for l in range(3):
                        s += bk * d_eng[k, l] * bmat[e, l, j]
                ke[e, i, j] = absa * s
    return ke, area, bmat


@njit(cache=True)
def locate_points(pts, nodes, tris, tol):
    n = pts.shape[0]
    m = tris.shape[0]
    owner = np.full(n, -1, dtype=np.int64)
    bary = np.zeros((n, 3))
    for i in range(n):
        px = pts[i, 0]
        py = pts[i, 1]
        for e in range(m):
            x1, y1 = nodes[tris[e, 0], 0], nodes[tris[e, 0], 1]
            x2, y2 = nodes[tris[e, 1], 0], nodes[tris[e, 1], 1]
            x3, y3 = nodes[tris[e, 2], 0], nodes[tris[e, 2], 1]
            if px < min(x1, x2, x3) - tol or px > max(x1, x2, x3) + tol:
                continue
            if py < min(y1, y2, y3) - tol or py > max(y1, y2, y3) + tol:
                continue
            det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3)
            l1 = ((y2 - y3) * (px - x3) + (x3 - x2) * (py - y3)) / det
            l2 = ((y3 - y1) * (px - x3) + (x1 - x3) * (py - y3)) / det
            l3 = 1.0 - l1 - l2
            if l1 >= -tol and l2 >= -tol and l3 >= -tol:
                owner[i] = e
                bary[i, 0] = l1
                bary[i, 1] = l2
                bary[i, 2] = l3
                break
    return owner, bary


@njit(cache=True)
def _jet_tanh_fwd(y, P, out):
    nd, n, w = P.shape
    for i in range(n):
        for j in range(w):
            yy = y[i, j]
            s = 1.0 - yy * yy
            out[0, i, j] = yy
            for d in range(1, nd):
                out[d, i, j] = s * P[d, i, j]


def jet_tanh_fwd(y, P):
    out = np.empty_like(P)
    _jet_tanh_fwd(np.ascontiguousarray(y), np.ascontiguousarray(P), out)
    return out


@njit(cache=True)
def _jet_tanh_bwd(G, y, P, gP):
    nd, n, w = P.shape
    for i in range(n):
        for j in range(w):
            yy = y[i, j]
            s = 1.0 - yy * yy
            acc = 0.0
            for d in range(1, nd):
                acc += G[d, i, j] * P[d, i, j]
                gP[d, i, j] = G[d, i, j] * s
            gP[0, i, j] = G[0, i, j] * s - 2.0 * yy * s * acc


def jet_tanh_bwd(G, y, P):
    gP = np.empty_like(P)
    _jet_tanh_bwd(np.ascontiguousarray(G), np.ascontiguousarray(y), np.ascontiguousarray(P), gP)
    return gP


@njit(cache=True)
def _jet_tanh_gate_fwd(y, P, A, D, H):
    nd, n, w = P.shape
    for i in range(n):
        for j in range(w):
            yy = y[i, j]
            s = 1.0 - yy * yy
            d0 = D[0, i, j]
            H[0, i, j] = A[0, i, j] + yy * d0
            for d in range(1, nd):
                H[d, i, j] = A[d, i, j] + yy * D[d, i, j] + s * P[d, i, j] * d0


def jet_tanh_gate_fwd(y, P, A, D):
    H = np.empty_like(P)
    _jet_tanh_gate_fwd(np.ascontiguousarray(y), np.ascontiguousarray(P),
                       np.ascontiguousarray(A), np.ascontiguousarray(D), H)
    return H


@njit(cache=True)
def _jet_tanh_gate_bwd(G, y, P, D, gP, gD):
    nd, n, w = P.shape
    for i in range(n):
        for j in range(w):
            yy = y[i, j]
            s = 1.0 - yy * yy
            g0 = G[0, i, j]
            d0 = D[0, i, j]
            gz0 = g0 * d0
            gd0 = g0 * yy
            acc = 0.0
            for d in range(1, nd):
                gd = G[d, i, j]
                pd = P[d, i, j]
                gz0 += gd * D[d, i, j]
                gd0 += gd * s * pd
                gzt = gd * d0
                acc += gzt * pd
                gP[d, i, j] = gzt * s
                gD[d, i, j] = gd * yy
            gD[0, i, j] = gd0
            gP[0, i, j] = gz0 * s - 2.0 * yy * s * acc


def jet_tanh_gate_bwd(G, y, P, D):
    gP = np.empty_like(P)
    gD = np.empty_like(D)
    _jet_tanh_gate_bwd(np.ascontiguousarray(G), np.ascontiguousarray(y), np.ascontiguousarray(P),
                       np.ascontiguousarray(D), gP, gD)
    return gP, gD
