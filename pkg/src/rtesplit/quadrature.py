"""Tetrahedron quadrature rules in barycentric coordinates (weights sum to 1)."""

import numpy as np
from scipy.special import roots_jacobi


def _perm_rule():
    # 14-point rule exact for degree 5 (positive weights)
    a1, w1 = 0.0927352503108912, 0.01224884051939366
    a2, w2 = 0.3108859192633006, 0.01878132095300264
    b, w3 = 0.4544962958743504, 0.007091003462846911
    pts, wts = [], []
    for a, w in ((a1, w1), (a2, w2)):
        for k in range(4):
            p = np.full(4, a)
            p[k] = 1.0 - 3.0 * a
            pts.append(p)
            wts.append(w)
    c = 0.5 - b
    for i in range(4):
        for j in range(i + 1, 4):
            p = np.full(4, c)
            p[[i, j]] = b
            pts.append(p)
            wts.append(w3)
    return np.array(pts), 6.0 * np.array(wts)


DEGREE5 = _perm_rule()


def conical_rule(n):
    """Collapsed Gauss-Jacobi product rule with n**3 points (degree 2n-1)."""
    x0, w0 = roots_jacobi(n, 2.0, 0.0)
    x1, w1 = roots_jacobi(n, 1.0, 0.0)
    x2, w2 = roots_jacobi(n, 0.0, 0.0)
    u, v, w = (x0 + 1) / 2, (x1 + 1) / 2, (x2 + 1) / 2
    w0, w1, w2 = w0 / 8, w1 / 4, w2 / 2
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    x = U
    y = V * (1 - U)
    z = W * (1 - U) * (1 - V)
    pts = np.column_stack([1 - x.ravel() - y.ravel() - z.ravel(), x.ravel(), y.ravel(), z.ravel()])
    wts = (w0[:, None, None] * w1[None, :, None] * w2[None, None, :]).ravel() * 6.0
    return pts, wts


def tet_points(mesh, rule):
    """Physical points (n_tets, n_q, 3) and weights (n_tets, n_q) incl. volume."""
    bary, w = rule
    coords = mesh.nodes[mesh.tets]
    return np.einsum("qi,tic->tqc", bary, coords), mesh.volumes[:, None] * w[None, :]
