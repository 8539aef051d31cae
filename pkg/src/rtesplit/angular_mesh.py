"""Hierarchical triangulation of the unit sphere and its DG(0) cell data.

The level-0 mesh is the cube projected onto the sphere with each face cut
into two triangles (12 cells).  Every refinement splits a spherical triangle
into four through the normalized edge midpoints, so level ``l`` has
``12 * 4**l`` cells.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

MAX_LEVEL = 6


@dataclass(frozen=True)
class AngularMesh:
    level: int
    vertices: np.ndarray  # (n_vertices, 3) unit vectors
    triangles: np.ndarray  # (n_cells, 3) vertex ids, counter-clockwise from outside
    centers: np.ndarray  # (n_cells, 3) unit directions
    areas: np.ndarray  # (n_cells,) steradians
    h_s: float

    @property
    def n_cells(self):
        return len(self.triangles)

    def cell_vertices(self, i):
        return self.vertices[self.triangles[i]]


def _cube_seed():
    corners = np.array([[x, y, z] for x in (-1.0, 1.0)
                        for y in (-1.0, 1.0) for z in (-1.0, 1.0)])
    index = {tuple(c): i for i, c in enumerate(corners)}
    triangles = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            # The cut runs through sign*(1,1,1) on every face, which keeps
            # the seed symmetric under s -> -s and the 3-fold (1,1,1) axis.
            d0 = sign * np.ones(3)
            d1 = -d0
            d1[axis] = sign
            others = [c for c in corners
                      if c[axis] == sign and not (np.array_equal(c, d0) or np.array_equal(c, d1))]
            for o in others:
                triangles.append([index[tuple(d0)], index[tuple(o)], index[tuple(d1)]])
    verts = corners / np.sqrt(3.0)
    return verts, _orient(verts, np.array(triangles))


def _orient(verts, tris):
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    flip = np.einsum("ij,ij->i", a, np.cross(b, c)) < 0
    tris = tris.copy()
    tris[flip, 1], tris[flip, 2] = tris[flip, 2], tris[flip, 1].copy()
    return tris


def _refine(verts, tris):
    verts = [v for v in verts]
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    out = []
    for a, b, c in tris:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        out += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(verts), np.array(out)


def spherical_triangle_area(a, b, c):
    """Exact area (spherical excess) of the triangles with unit vertices a, b, c.

    Uses the Van Oosterom-Strackee form
    tan(E/2) = |a.(b x c)| / (1 + a.b + b.c + c.a), stable for small cells.
    """
    triple = np.abs(np.einsum("...i,...i->...", a, np.cross(b, c)))
    denom = (1.0 + np.einsum("...i,...i->...", a, b)
             + np.einsum("...i,...i->...", b, c)
             + np.einsum("...i,...i->...", c, a))
    return 2.0 * np.arctan2(triple, denom)


def _arc(u, v):
    # atan2 form stays accurate for nearly parallel vectors
    return np.arctan2(np.linalg.norm(np.cross(u, v), axis=-1),
                      np.einsum("...i,...i->...", u, v))


def build_angular_mesh(level):
    if level < 0:
        raise ValueError(f"angular level must be non-negative, got {level}")
    if level > MAX_LEVEL:
        raise ResourceLimitError(
            f"angular level {level} exceeds the guard of {MAX_LEVEL} "
            f"({12 * 4**level} cells)")
    verts, tris = _cube_seed()
    for _ in range(level):
        verts, tris = _refine(verts, tris)
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    centers = a + b + c
    centers /= np.linalg.norm(centers, axis=1)[:, None]
    areas = spherical_triangle_area(a, b, c)
    h_s = float(max(_arc(a, b).max(), _arc(b, c).max(), _arc(c, a).max()))
    for arr in (verts, tris, centers, areas):
        arr.setflags(write=False)
    return AngularMesh(level, verts, tris, centers, areas, h_s)


def cell_center(mesh, i):
    if not 0 <= i < mesh.n_cells:
        raise IndexError(f"cell index {i} out of range [0, {mesh.n_cells})")
    return mesh.centers[i]


def contains(mesh, i, s, tol=1e-12):
    """True if unit direction ``s`` lies in spherical triangle ``i``."""
    a, b, c = mesh.cell_vertices(i)
    return all(np.dot(np.cross(p, q), s) >= -tol for p, q in ((a, b), (b, c), (c, a)))


def subcell_quadrature(mesh, refine):
    """Per-cell angular quadrature from ``refine`` levels of sub-triangles.

    Returns ``(points, weights)`` of shapes (n_cells, 4**refine, 3) and
    (n_cells, 4**refine).  Weights are exact sub-triangle areas, so each row
    sums to the cell area; ``refine=0`` is the cell-center rule.
    """
    n = mesh.n_cells
    verts = mesh.vertices[mesh.triangles]  # (n, 3, 3)
    tri = verts
    for _ in range(refine):
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        ab, bc, ca = (_normalize(a + b), _normalize(b + c), _normalize(c + a))
        tri = np.stack([
            np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1),
        ], 1).reshape(-1, 3, 3)
    pts = _normalize(tri.sum(axis=1))
    w = spherical_triangle_area(tri[:, 0], tri[:, 1], tri[:, 2])
    m = 4**refine
    if refine == 0:
        pts, w = mesh.centers.copy(), mesh.areas.copy()
    return pts.reshape(n, m, 3), w.reshape(n, m)


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def midpoint_quadrature(mesh, g):
    """Sum of g(s_i)|K_i| over cells; ``g`` maps (n, 3) directions to (n,)."""
    return float(np.dot(g(mesh.centers), mesh.areas))


def write_angular_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(f"# level {mesh.level} cells {mesh.n_cells} h_s {mesh.h_s:.16e}\n")
        for i, (c, a) in enumerate(zip(mesh.centers, mesh.areas)):
            fh.write(f"{i} {c[0]:.16e} {c[1]:.16e} {c[2]:.16e} {a:.16e}\n")
