"""Structured tetrahedral mesh of the unit cube with P1 element data."""

from dataclasses import dataclass

import numpy as np

# Kuhn split: six tetrahedra around the main diagonal v0-v7 of each cube,
# local vertex ids follow v = ix + 2*iy + 4*iz.
_KUHN = np.array([
    [0, 1, 3, 7],
    [0, 1, 7, 5],
    [0, 5, 7, 4],
    [0, 3, 2, 7],
    [0, 6, 4, 7],
    [0, 2, 6, 7],
])

_TET_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True)
class SpatialMesh:
    n: int
    nodes: np.ndarray  # (N_x, 3)
    tets: np.ndarray  # (n_tets, 4), positively oriented
    grads: np.ndarray  # (n_tets, 4, 3) constant P1 basis gradients
    volumes: np.ndarray  # (n_tets,)
    diameters: np.ndarray  # (n_tets,) longest edge
    boundary_faces: np.ndarray  # (n_faces, 3) node ids
    face_normals: np.ndarray  # (n_faces, 3) outward, axis aligned

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def h_x(self):
        return 1.0 / (self.n - 1)

    @property
    def h_max(self):
        return float(self.diameters.max())

    def boundary_nodes(self):
        return np.unique(self.boundary_faces)


@dataclass(frozen=True)
class DirectionBoundary:
    direction: np.ndarray
    inflow_nodes: np.ndarray  # sorted node ids on the inflow part
    outflow_faces: np.ndarray  # ids into mesh.boundary_faces with s.n >= 0
    inflow_faces: np.ndarray


def p1_gradients(coords):
    """Barycentric gradients for tetrahedra given as (n, 4, 3) coordinates."""
    jac = coords[:, 1:] - coords[:, :1]  # rows are edge vectors
    inv = np.linalg.inv(jac)
    g = np.empty((len(coords), 4, 3))
    g[:, 1:] = np.transpose(inv, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g


def build_spatial_mesh(n):
    if n < 2:
        raise ValueError(f"need at least 2 vertices per axis, got n={n}")
    x = np.linspace(0.0, 1.0, n)
    # node id = i + n*j + n*n*k for coordinates (x_i, x_j, x_k)
    zz, yy, xx = np.meshgrid(x, x, x, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    i, j, k = np.meshgrid(np.arange(n - 1), np.arange(n - 1), np.arange(n - 1), indexing="ij")
    base = (i + n * j + n * n * k).ravel()
    offsets = np.array([dx + n * dy + n * n * dz
                        for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)])
    cube = base[:, None] + offsets[None, :]  # (n_cubes, 8)
    tets = cube[:, _KUHN].reshape(-1, 4)

    coords = nodes[tets]
    signed = np.linalg.det(coords[:, 1:] - coords[:, :1]) / 6.0
    neg = signed < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3], tets[neg, 2].copy()
    coords = nodes[tets]
    volumes = np.abs(signed)
    grads = p1_gradients(coords)

    edges = coords[:, [0, 0, 0, 1, 1, 2]] - coords[:, [1, 2, 3, 2, 3, 3]]
    diameters = np.linalg.norm(edges, axis=2).max(axis=1)

    faces, normals = _boundary_faces(nodes, tets)
    for arr in (nodes, tets, grads, volumes, diameters, faces, normals):
        arr.setflags(write=False)
    return SpatialMesh(n, nodes, tets, grads, volumes, diameters, faces, normals)


def _boundary_faces(nodes, tets):
    all_faces = np.sort(tets[:, _TET_FACES].reshape(-1, 3), axis=1)
    uniq, counts = np.unique(all_faces, axis=0, return_counts=True)
    faces = uniq[counts == 1]
    pts = nodes[faces]
    normals = np.zeros((len(faces), 3))
    for axis in range(3):
        c = pts[:, :, axis]
        normals[np.all(c == 0.0, axis=1), axis] = -1.0
        normals[np.all(c == 1.0, axis=1), axis] = 1.0
    assert np.all(np.abs(normals).sum(axis=1) == 1.0)
    return faces, normals


def classify_boundary(mesh, s, tol=1e-12):
    """Split the boundary for direction ``s`` into inflow and outflow parts.

    A face is inflow when s.n < -tol; tangential faces count as outflow.
    """
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > 1e-10:
        raise ValueError(f"direction must be a unit vector, |s| = {np.linalg.norm(s)}")
    dots = mesh.face_normals @ s
    inflow = dots < -tol
    return DirectionBoundary(
        direction=s,
        inflow_nodes=np.unique(mesh.boundary_faces[inflow]),
        outflow_faces=np.flatnonzero(~inflow),
        inflow_faces=np.flatnonzero(inflow),
    )


def write_spatial_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"# n {mesh.n} nodes {mesh.n_nodes} tets {len(mesh.tets)}\n")
        fh.write("# node_id x y z\n")
        for i, p in enumerate(mesh.nodes):
            fh.write(f"{i} {p[0]:.16e} {p[1]:.16e} {p[2]:.16e}\n")
        fh.write("# tet_id n0 n1 n2 n3\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")
