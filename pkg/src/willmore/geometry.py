"""Closed oriented triangle meshes with quadrature and curvature data.

Genus-0 shapes are meshed by icosahedral subdivision projected onto the
surface; the torus uses a structured (theta, alpha) grid.  Vertex count grows
~4x per refinement step in both families.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError
from .shapes import Torus, _as_points

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array([
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
], dtype=float)

_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def unit_sphere_grid(refinement: int):
    """Icosahedral subdivision of the unit sphere: (directions, triangles)."""
    if refinement < 0:
        raise MeshError(f"refinement must be >= 0, got {refinement}")
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1)[:, None]
    faces = _ICO_FACES
    for _ in range(refinement):
        verts, faces = _subdivide_on_sphere(verts, faces)
    return verts, faces


def _subdivide_on_sphere(verts, faces):
    verts = [v for v in verts]
    midpoint_cache = {}

    def midpoint(i, j):
        key = (i, j) if i < j else (j, i)
        idx = midpoint_cache.get(key)
        if idx is None:
            m = verts[i] + verts[j]
            m = m / np.linalg.norm(m)
            verts.append(m)
            idx = len(verts) - 1
            midpoint_cache[key] = idx
        return idx

    out = np.empty((4 * len(faces), 3), dtype=np.int64)
    for k, (a, b, c) in enumerate(faces):
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out[4 * k:4 * k + 4] = [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return np.array(verts), out


def torus_grid(shape: Torus, refinement: int):
    """Structured torus mesh: (vertices, triangles), Euler characteristic 0."""
    if refinement < 0:
        raise MeshError(f"refinement must be >= 0, got {refinement}")
    n_theta = 12 * 2**refinement
    n_alpha = 6 * 2**refinement
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    alpha = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
    tt, aa = np.meshgrid(theta, alpha, indexing="ij")
    verts = shape.param_point(tt.ravel(), aa.ravel())

    def vid(i, j):
        return (i % n_theta) * n_alpha + (j % n_alpha)

    faces = []
    for i in range(n_theta):
        for j in range(n_alpha):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            faces.append([v00, v10, v11])
            faces.append([v00, v11, v01])
    return verts, np.array(faces, dtype=np.int64)


@dataclass
class SurfaceMesh:
    """Closed oriented triangulation of a shape boundary.

    Triangles are wound so their normals point away from the body.  Analytic
    per-vertex normals and mean curvature are attached whenever the shape is
    parametric; meshes imported from file carry discrete substitutes.
    """

    vertices: np.ndarray          # (V, 3)
    triangles: np.ndarray         # (T, 3) int
    tri_areas: np.ndarray         # (T,)
    tri_centroids: np.ndarray     # (T, 3)
    tri_normals: np.ndarray       # (T, 3) unit
    tri_diameters: np.ndarray     # (T,) longest edge
    vertex_normals: np.ndarray    # (V, 3) unit, outward
    vertex_H: np.ndarray | None   # (V,) analytic mean curvature, if parametric
    vertex_areas: np.ndarray      # (V,) one third of adjacent triangle area
    shape: object | None = None
    refinement: int = 0
    _freeze: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self._freeze:
            for a in (self.vertices, self.triangles, self.tri_areas,
                      self.tri_centroids, self.tri_normals, self.tri_diameters,
                      self.vertex_normals, self.vertex_areas):
                a.setflags(write=False)
            if self.vertex_H is not None:
                self.vertex_H.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def area(self):
        return float(np.sum(self.tri_areas))

    def tri_vertices(self):
        """(T, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def euler_characteristic(self):
        edges = _undirected_edges(self.triangles)
        return self.n_vertices - len(edges) + self.n_triangles

    def centroid(self):
        w = self.tri_areas[:, None]
        return (self.tri_centroids * w).sum(axis=0) / self.tri_areas.sum()

    def translated(self, offset):
        off = np.asarray(offset, dtype=float)
        return _mesh_from_arrays(self.vertices + off, self.triangles,
                                 vertex_H=None if self.vertex_H is None else self.vertex_H.copy(),
                                 vertex_normals=self.vertex_normals.copy(),
                                 shape=None, refinement=self.refinement)

    def scaled(self, factor):
        lam = float(factor)
        if lam <= 0:
            raise MeshError("scale factor must be positive")
        vh = None if self.vertex_H is None else self.vertex_H / lam
        return _mesh_from_arrays(self.vertices * lam, self.triangles,
                                 vertex_H=vh, vertex_normals=self.vertex_normals.copy(),
                                 shape=None, refinement=self.refinement)


def _undirected_edges(triangles):
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return {tuple(row) for row in e.tolist()}


def _triangle_geometry(vertices, triangles):
    tv = vertices[triangles]
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    norms = np.linalg.norm(cross, axis=1)
    if np.any(norms < 1e-300):
        raise MeshError("degenerate triangle (area at round-off level)")
    areas = 0.5 * norms
    normals = cross / norms[:, None]
    centroids = tv.mean(axis=1)
    e = np.stack([
        np.linalg.norm(tv[:, 1] - tv[:, 0], axis=1),
        np.linalg.norm(tv[:, 2] - tv[:, 1], axis=1),
        np.linalg.norm(tv[:, 0] - tv[:, 2], axis=1),
    ])
    return areas, normals, centroids, e.max(axis=0)


def _vertex_areas(n_vertices, triangles, tri_areas):
    va = np.zeros(n_vertices)
    np.add.at(va, triangles.ravel(), np.repeat(tri_areas / 3.0, 3))
    return va


def _mesh_from_arrays(vertices, triangles, vertex_H, vertex_normals, shape, refinement):
    areas, normals, centroids, diams = _triangle_geometry(vertices, triangles)
    return SurfaceMesh(
        vertices=np.ascontiguousarray(vertices, dtype=float),
        triangles=np.ascontiguousarray(triangles, dtype=np.int64),
        tri_areas=areas, tri_centroids=centroids, tri_normals=normals,
        tri_diameters=diams, vertex_normals=vertex_normals, vertex_H=vertex_H,
        vertex_areas=_vertex_areas(vertices.shape[0], triangles, areas),
        shape=shape, refinement=refinement,
    )


def make_surface(shape, refinement: int) -> SurfaceMesh:
    """Mesh a parametric shape; attaches analytic normals and curvature."""
    if isinstance(shape, Torus):
        vertices, triangles = torus_grid(shape, refinement)
    else:
        dirs, triangles = unit_sphere_grid(refinement)
        vertices = shape.from_directions(dirs)
    nu = shape.unit_normal(vertices)
    H = shape.mean_curvature(vertices)

    # Flip the whole winding if the base orientation came out inward.
    areas, normals, centroids, _ = _triangle_geometry(vertices, triangles)
    agree = np.einsum("ti,ti->t", normals, nu[triangles].mean(axis=1))
    if np.all(agree < 0):
        triangles = triangles[:, [0, 2, 1]]
    elif not np.all(agree > 0):
        raise MeshError("inconsistent base winding against analytic normals")

    mesh = _mesh_from_arrays(vertices, triangles, H, nu, shape, refinement)
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: SurfaceMesh):
    """Check closedness, orientation consistency and Euler characteristic."""
    directed = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            if (u, v) in directed:
                raise MeshError(f"edge ({u},{v}) repeated with equal orientation")
            directed[(u, v)] = t
    for (u, v) in directed:
        if (v, u) not in directed:
            raise MeshError(f"boundary edge ({u},{v}): mesh is not closed")

    chi = mesh.euler_characteristic()
    genus = getattr(mesh.shape, "genus", 0) if mesh.shape is not None else None
    if genus is not None and chi != 2 - 2 * genus:
        raise MeshError(f"Euler characteristic {chi} != {2 - 2 * genus}")

    dots = np.einsum("ti,ti->t", mesh.tri_normals,
                     mesh.vertex_normals[mesh.triangles].mean(axis=1))
    if not np.all(dots > 0):
        raise MeshError("triangle winding disagrees with outward vertex normals")


def surface_integral(mesh, values) -> float:
    """Integrate per-vertex samples: sum of (triangle mean) * (triangle area).

    Exact for integrands that are constant per triangle, O(h^2) for smooth
    ones.  Works for SurfaceMesh and for level-set meshes exposing the same
    triangles/tri_areas fields.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.vertices.shape[0],):
        raise ValueError(
            f"need one sample per vertex: got {values.shape}, "
            f"mesh has {mesh.vertices.shape[0]} vertices"
        )
    tri_mean = values[mesh.triangles].mean(axis=1)
    return float(np.sum(tri_mean * mesh.tri_areas))


def mesh_curvature(mesh: SurfaceMesh) -> np.ndarray:
    """Per-vertex mean curvature (sum convention, sphere positive).

    Returns the attached analytic values when present; otherwise the
    cotangent-Laplacian of the position dotted with the outward normal.
    """
    if mesh.vertex_H is not None:
        return mesh.vertex_H.copy()
    return cotan_mean_curvature(mesh)


def cotan_mean_curvature(mesh: SurfaceMesh) -> np.ndarray:
    tv = mesh.tri_vertices()
    if np.any(mesh.tri_areas <= 1e-300):
        raise MeshError("degenerate triangle in curvature computation")
    lap = np.zeros_like(mesh.vertices)
    tris = mesh.triangles
    for k in range(3):
        i = tris[:, k]
        j = tris[:, (k + 1) % 3]
        o = tris[:, (k + 2) % 3]
        u = mesh.vertices[i] - mesh.vertices[o]
        v = mesh.vertices[j] - mesh.vertices[o]
        cot = np.einsum("ni,ni->n", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        contrib = 0.5 * cot[:, None] * (mesh.vertices[j] - mesh.vertices[i])
        np.add.at(lap, i, contrib)
        np.add.at(lap, j, -contrib)
    lap /= mesh.vertex_areas[:, None]
    # Delta_S x = -H nu with H the sum of principal curvatures.
    return -np.einsum("ni,ni->n", lap, mesh.vertex_normals)


def write_off(path, mesh, vertex_columns=None):
    """OFF-style text export; optional per-vertex scalar columns appended."""
    cols = []
    if vertex_columns:
        for name, vals in vertex_columns.items():
            vals = np.asarray(vals, dtype=float)
            if vals.shape != (mesh.vertices.shape[0],):
                raise ValueError(f"column {name!r} has wrong length")
            cols.append((name, vals))
    with open(path, "w") as f:
        f.write("OFF\n")
        if cols:
            f.write("# vertex columns: x y z " + " ".join(n for n, _ in cols) + "\n")
        f.write(f"{mesh.vertices.shape[0]} {mesh.triangles.shape[0]} 0\n")
        for i, v in enumerate(mesh.vertices):
            extra = "".join(f" {c[i]:.17g}" for _, c in cols)
            f.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}{extra}\n")
        for t in mesh.triangles:
            f.write(f"3 {t[0]} {t[1]} {t[2]}\n")


def read_off(path) -> SurfaceMesh:
    """Read an OFF file written by write_off (shape provenance is lost).

    Vertex normals are rebuilt from incident triangles, so curvature falls
    back to the discrete estimate.
    """
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if lines[0] != "OFF":
        raise MeshError("not an OFF file")
    nv, nt, _ = (int(s) for s in lines[1].split())
    vertices = np.array([[float(x) for x in lines[2 + i].split()[:3]] for i in range(nv)])
    triangles = np.array(
        [[int(x) for x in lines[2 + nv + i].split()[1:4]] for i in range(nt)],
        dtype=np.int64,
    )
    areas, normals, centroids, diams = _triangle_geometry(vertices, triangles)
    vn = np.zeros_like(vertices)
    np.add.at(vn, triangles.ravel(), np.repeat(normals * areas[:, None], 3, axis=0))
    vn /= np.linalg.norm(vn, axis=1, keepdims=True)
    mesh = SurfaceMesh(
        vertices=vertices, triangles=triangles, tri_areas=areas,
        tri_centroids=centroids, tri_normals=normals, tri_diameters=diams,
        vertex_normals=vn, vertex_H=None,
        vertex_areas=_vertex_areas(nv, triangles, areas),
        shape=None, refinement=-1,
    )
    return mesh
