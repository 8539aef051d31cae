"""Direction-independent P1/SUPG components and per-direction Step-2 systems.

Matrices use the row = test function, column = trial function convention,
so for trial ``psi_l`` and test ``psi_m`` the convection component is
``A[a][m, l] = int d_a(psi_l) psi_m``.  Every component is stored on the
same CSR pattern (the tetrahedral node graph), which turns composition for
a direction ``s`` into a linear combination of data arrays.

For a direction ``s`` the Step-2 matrix is

    M + sum_a s_a Md[a] + dt * (sum_a s_a A[a] + sum_{a<=b} c_ab s_a s_b Ad[a, b])

with c_aa = 1 and c_ab = 2 otherwise.  ``Ad[a, b]`` holds the symmetrized
product ``delta_K (d_a psi_l d_b psi_m + d_b psi_l d_a psi_m) / 2``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError
from .spatial_mesh import classify_boundary

PAIRS = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]

# 4-point degree-2 rule, barycentric coordinates
_A, _B = 0.5854101966249685, 0.1381966011250105
LOAD_RULE = (
    np.array([[_A, _B, _B, _B], [_B, _A, _B, _B], [_B, _B, _A, _B], [_B, _B, _B, _A]]),
    np.full(4, 0.25),
)


@dataclass(frozen=True)
class StabilizationPolicy:
    """delta_K = delta0 * min(h_K, dt), h_K the longest edge of the tet.

    ``fixed`` replaces the rule by a constant, mainly for experiments; a
    value of 0 switches stabilization off.
    """

    delta0: float = 0.25
    fixed: float | None = None

    def deltas(self, mesh, dt):
        if self.fixed is not None:
            return np.full(len(mesh.tets), float(self.fixed))
        return self.delta0 * np.minimum(mesh.diameters, dt)

    def check(self, mesh, dt):
        d = self.deltas(mesh, dt)
        if np.any(d < 0):
            raise ConfigurationError("stabilization violates 0 <= delta_K")
        if np.any(d > dt / 4.0 * (1 + 1e-12)):
            raise ConfigurationError(
                f"stabilization violates δ_K ≤ Δt/4 (delta_K <= dt/4): max delta_K = {d.max():.6g}, "
                f"dt/4 = {dt / 4:.6g}")
        if self.fixed is None and np.any(d > self.delta0 * mesh.diameters * (1 + 1e-12)):
            raise ConfigurationError("stabilization violates delta_K <= delta0*h")
        return d


def _pattern(mesh):
    n = mesh.n_nodes
    rows = np.repeat(mesh.tets, 4, axis=1).ravel()  # (T*16,) test index i
    cols = np.tile(mesh.tets, (1, 4)).ravel()  # trial index j
    pat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    pat.sum_duplicates()
    pat.sort_indices()
    row_of = np.repeat(np.arange(n), np.diff(pat.indptr))
    keys = row_of.astype(np.int64) * n + pat.indices
    pos = np.searchsorted(keys, rows.astype(np.int64) * n + cols)
    diag = np.searchsorted(keys, np.arange(n, dtype=np.int64) * (n + 1))
    return pat.indptr.copy(), pat.indices.copy(), pos.reshape(-1, 4, 4), diag, row_of


@dataclass
class SpatialComponents:
    mesh: object
    dt: float
    deltas: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    diag_pos: np.ndarray
    row_of: np.ndarray
    M: np.ndarray  # data arrays on the shared pattern
    A: list
    Md: list
    Ad: dict
    load_points: np.ndarray  # (n_tets*4, 3)
    P: sp.csr_matrix = field(repr=False)  # (N_x, n_q) load weights
    Pd: list = field(repr=False)  # SUPG load weights per axis

    @property
    def n(self):
        return len(self.indptr) - 1

    def matrix(self, data):
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    @property
    def mass(self):
        return self.matrix(self.M)


def _scatter(pos, local, size):
    out = np.zeros(size)
    np.add.at(out, pos.ravel(), local.ravel())
    return out


def assemble_spatial_components(mesh, policy, dt):
    deltas = policy.check(mesh, dt)
    indptr, indices, pos, diag, row_of = _pattern(mesh)
    nnz = len(indices)
    vol, g = mesh.volumes, mesh.grads  # g[t, i, a]

    mloc = vol[:, None, None] / 20.0 * (np.ones((4, 4)) + np.eye(4))
    M = _scatter(pos, mloc, nnz)
    A, Md = [], []
    for a in range(3):
        # test i, trial j: int d_a(psi_j) psi_i = g[j, a] vol / 4
        A.append(_scatter(pos, np.broadcast_to((vol / 4)[:, None, None] * g[:, None, :, a], (len(vol), 4, 4)), nnz))
        # delta int psi_j d_a(psi_i)
        Md.append(_scatter(pos, np.broadcast_to((deltas * vol / 4)[:, None, None] * g[:, :, None, a], (len(vol), 4, 4)), nnz))
    Ad = {}
    for a, b in PAIRS:
        loc = 0.5 * (g[:, :, None, a] * g[:, None, :, b] + g[:, :, None, b] * g[:, None, :, a])
        Ad[a, b] = _scatter(pos, (deltas * vol)[:, None, None] * loc, nnz)

    bary, w = LOAD_RULE
    coords = mesh.nodes[mesh.tets]  # (T, 4, 3)
    points = np.einsum("qi,tic->tqc", bary, coords).reshape(-1, 3)
    nq = len(w)
    q_index = np.arange(len(vol) * nq).reshape(len(vol), nq)
    rows = np.repeat(mesh.tets[:, None, :], nq, axis=1)  # (T, q, i)
    cols = np.repeat(q_index[:, :, None], 4, axis=2)
    shape = (mesh.n_nodes, len(points))
    vals = vol[:, None, None] * w[None, :, None] * bary[None, :, :]
    P = sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    Pd = []
    for a in range(3):
        vals = (deltas * vol)[:, None, None] * w[None, :, None] * g[:, None, :, a]
        Pd.append(sp.csr_matrix((np.broadcast_to(vals, rows.shape).ravel(), (rows.ravel(), cols.ravel())), shape=shape))

    return SpatialComponents(mesh, dt, deltas, indptr, indices, diag, row_of,
                             M, A, Md, Ad, points, P, Pd)


def _unit(s):
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > 1e-10:
        raise ValueError(f"direction must be a unit vector, |s| = {np.linalg.norm(s)}")
    return s


def rhs_mass_data(comp, s):
    """Data of M + M^delta(s), the matrix multiplying the Step-1 result."""
    s = _unit(s)
    return comp.M + s[0] * comp.Md[0] + s[1] * comp.Md[1] + s[2] * comp.Md[2]


def convection_data(comp, s):
    """Data of A(s) + A^delta(s)."""
    s = _unit(s)
    out = s[0] * comp.A[0] + s[1] * comp.A[1] + s[2] * comp.A[2]
    for a, b in PAIRS:
        c = 1.0 if a == b else 2.0
        out = out + c * s[a] * s[b] * comp.Ad[a, b]
    return out


def compose_step2_matrix(comp, s, dt=None, boundary=None):
    """Step-2 system matrix for direction ``s`` with inflow rows set to identity."""
    dt = comp.dt if dt is None else dt
    s = _unit(s)
    data = rhs_mass_data(comp, s) + dt * convection_data(comp, s)
    if boundary is None:
        boundary = classify_boundary(comp.mesh, s)
    apply_dirichlet_rows(comp, data, boundary.inflow_nodes)
    return comp.matrix(data)


def apply_dirichlet_rows(comp, data, nodes):
    if len(nodes):
        mask = np.zeros(comp.n, dtype=bool)
        mask[nodes] = True
        data[mask[comp.row_of]] = 0.0
        data[comp.diag_pos[nodes]] = 1.0
    return data


def evaluate_on_load_points(comp, f, S, t):
    """f at every load quadrature point for each direction row of ``S``."""
    S = np.atleast_2d(S)
    vals = f(comp.load_points[None, :, :], S[:, None, :], t)
    return np.broadcast_to(vals, (len(S), len(comp.load_points)))


def assemble_loads(comp, f, S, t, boundaries=None):
    """F + F^delta for each direction in ``S``; returns (len(S), N_x).

    Entries on inflow nodes are zeroed when ``boundaries`` is given.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    vals = np.ascontiguousarray(evaluate_on_load_points(comp, f, S, t))
    F = (comp.P @ vals.T).T
    for a in range(3):
        F += S[:, a, None] * (comp.Pd[a] @ vals.T).T
    if boundaries is not None:
        for row, bd in zip(F, boundaries):
            row[bd.inflow_nodes] = 0.0
    return F


def assemble_load(comp, f, s, t, boundary=None):
    s = _unit(s)
    if boundary is None:
        boundary = classify_boundary(comp.mesh, s)
    return assemble_loads(comp, f, s[None, :], t, [boundary])[0]


def assemble_step2_direct(mesh, deltas, s, dt):
    """Reference assembly of the Step-2 matrix for one ``s`` (no boundary rows).

    Works element by element with s.grad(psi) formed directly; used only to
    cross-check the component split.
    """
    s = _unit(s)
    n = mesh.n_nodes
    rows, cols, vals = [], [], []
    for t, tet in enumerate(mesh.tets):
        vol, g, d = mesh.volumes[t], mesh.grads[t], deltas[t]
        sg = g @ s  # s . grad psi_i
        for i in range(4):
            for j in range(4):
                m = vol / 20.0 * (2.0 if i == j else 1.0)
                md = d * vol / 4.0 * sg[i]
                a = vol / 4.0 * sg[j]
                ad = d * vol * sg[i] * sg[j]
                rows.append(tet[i])
                cols.append(tet[j])
                vals.append(m + md + dt * (a + ad))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.sort_indices()
    return A
