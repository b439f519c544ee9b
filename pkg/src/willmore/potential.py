"""Exterior Dirichlet solve (u = 1 on the boundary, decay at infinity).

Single-layer ansatz with piecewise-constant panel densities and collocation
at panel centroids:

    int_{boundary} phi(y) / |x - y| dS(y) = 1   at every centroid x.

With this kernel normalization u ~ Cap/|x| far away, Cap(ball_R) = R, and the
exterior boundary gradient is |Du| = 4 pi phi panel by panel.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from scipy.spatial import cKDTree

from . import _kernels
from .errors import EvalDomainError, SolverError
from .geometry import SurfaceMesh, make_surface
from .shapes import shape_from_dict

FOUR_PI = 4.0 * math.pi

# Quadrature controls for field evaluation (see _kernels._panel_accumulate).
NEAR_THETA = 4.0
MAX_SUBDIV_DEPTH = 24


@dataclass
class FieldSample:
    """u, Du, D2u of the exterior potential at one point."""

    x: np.ndarray
    u: float
    Du: np.ndarray       # (3,)
    D2u: np.ndarray      # (3, 3) symmetric, trace-free up to round-off

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.Du))

    @property
    def laplacian(self):
        return float(np.trace(self.D2u))


@dataclass
class PotentialSolution:
    """Solved single-layer density plus evaluators for the exterior field."""

    mesh: SurfaceMesh
    sigma: np.ndarray            # (T,) panel densities, charge per area
    cap: float                   # total charge = capacity (n = 3)
    n: int = 3
    diagnostics: dict = field(default_factory=dict)
    _tree: cKDTree | None = field(default=None, repr=False)

    def __post_init__(self):
        self.sigma.setflags(write=False)

    @property
    def tri_vertices(self):
        return self.mesh.tri_vertices()

    def _centroid_tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.mesh.tri_centroids)
        return self._tree

    # -- raw evaluation (no domain guard; used by trusted internal paths) --

    def _eval_raw(self, points, want_hess=True):
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        return _kernels.eval_fields(pts, self.tri_vertices, self.sigma,
                                    NEAR_THETA, MAX_SUBDIV_DEPTH, want_hess)

    # -- guarded public evaluation --

    def exclusion_distance(self, points):
        """Distance to nearest centroid minus the local half panel diameter.

        Negative or small values mean the point sits in the near-surface
        shell where panel quadrature degrades.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist, idx = self._centroid_tree().query(pts)
        return dist - 0.5 * self.mesh.tri_diameters[idx], idx

    def guard_points(self, points, shell_factor=0.5):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist, idx = self._centroid_tree().query(pts)
        shell = shell_factor * self.mesh.tri_diameters[idx]
        bad_shell = dist < shell
        if np.any(bad_shell):
            k = int(np.argmax(bad_shell))
            raise EvalDomainError(
                f"point {pts[k]} is inside the near-surface exclusion shell "
                f"(distance {dist[k]:.3g} < {shell[k]:.3g})"
            )
        shape = self.mesh.shape
        if shape is not None:
            inside = shape.implicit(pts) < 0
        else:
            # no provenance: inward side of the nearest panel counts as inside
            d = pts - self.mesh.tri_centroids[idx]
            inside = np.einsum("ni,ni->n", d, self.mesh.tri_normals[idx]) < 0
        if np.any(inside):
            k = int(np.argmax(inside))
            raise EvalDomainError(f"point {pts[k]} lies inside the body")


def solve_exterior_potential(mesh: SurfaceMesh, direct_limit=6000,
                             gmres_rtol=1e-12) -> PotentialSolution:
    """Assemble and solve the collocation system; returns the solution.

    Dense LU up to direct_limit panels, Jacobi-preconditioned GMRES beyond.
    """
    tris = mesh.tri_vertices()
    obs = mesh.tri_centroids
    N = mesh.n_triangles
    A = _kernels.assemble_single_layer(obs, tris)
    b = np.ones(N)

    diagnostics = {"panels": N, "method": "lu" if N <= direct_limit else "gmres"}
    if N <= direct_limit:
        anorm = np.linalg.norm(A, 1)
        lu, piv = scipy.linalg.lu_factor(A)
        sigma = scipy.linalg.lu_solve((lu, piv), b)
        rcond, info = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")
        if info != 0 or not np.isfinite(sigma).all():
            raise SolverError(f"dense solve failed (info={info})")
        diagnostics["rcond"] = float(rcond)
        if rcond < 1e-12:
            raise SolverError(f"collocation system nearly singular (rcond={rcond:.2e})")
    else:
        diag = np.ascontiguousarray(np.diag(A))
        M = scipy.sparse.linalg.LinearOperator((N, N), matvec=lambda v: v / diag)
        iters = [0]

        def count(_):
            iters[0] += 1

        sigma, info = scipy.sparse.linalg.gmres(
            A, b, rtol=gmres_rtol, atol=0.0, restart=400, maxiter=5, M=M,
            callback=count, callback_type="pr_norm")
        if info != 0 or not np.isfinite(sigma).all():
            raise SolverError(f"GMRES did not converge (info={info})")
        diagnostics["iterations"] = iters[0]

    residual = A @ sigma - b
    diagnostics["residual_inf"] = float(np.max(np.abs(residual)))
    del A

    cap = float(np.sum(sigma * mesh.tri_areas))
    diagnostics["min_density"] = float(sigma.min())
    diagnostics["max_density"] = float(sigma.max())
    if cap <= 0:
        raise SolverError(f"nonpositive capacity {cap}")
    return PotentialSolution(mesh=mesh, sigma=sigma, cap=cap,
                             diagnostics=diagnostics)


def eval_field(sol: PotentialSolution, x, shell_factor=0.5) -> FieldSample:
    """Evaluate (u, Du, D2u) at a single exterior point.

    Rejects points inside the body or closer to the surface than
    shell_factor times the local panel diameter.
    """
    x = np.asarray(x, dtype=float)
    sol.guard_points(x[None, :], shell_factor=shell_factor)
    row = sol._eval_raw(x[None, :], want_hess=True)[0]
    return _sample_from_row(x, row)


def eval_field_batch(sol: PotentialSolution, points, shell_factor=0.5):
    """Vectorized eval: returns (u (P,), Du (P,3), D2u (P,3,3))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sol.guard_points(pts, shell_factor=shell_factor)
    rows = sol._eval_raw(pts, want_hess=True)
    return unpack_rows(rows)


def unpack_rows(rows):
    u = rows[:, 0].copy()
    grad = rows[:, 1:4].copy()
    hess = np.empty((rows.shape[0], 3, 3))
    hess[:, 0, 0] = rows[:, 4]
    hess[:, 1, 1] = rows[:, 5]
    hess[:, 2, 2] = rows[:, 6]
    hess[:, 0, 1] = hess[:, 1, 0] = rows[:, 7]
    hess[:, 0, 2] = hess[:, 2, 0] = rows[:, 8]
    hess[:, 1, 2] = hess[:, 2, 1] = rows[:, 9]
    return u, grad, hess


def _sample_from_row(x, row):
    u, grad, hess = unpack_rows(row[None, :])
    return FieldSample(x=x, u=float(u[0]), Du=grad[0], D2u=hess[0])


def boundary_gradient_norm(sol: PotentialSolution) -> np.ndarray:
    """Per-panel |Du| on the boundary via the normal-derivative jump 4 pi phi."""
    if sol.sigma.min() <= 0.0:
        raise SolverError(
            f"nonpositive panel density (min {sol.sigma.min():.3e}); "
            "solver quality insufficient for boundary gradients"
        )
    return FOUR_PI * sol.sigma


def vertex_gradient_norm(sol: PotentialSolution) -> np.ndarray:
    """Boundary |Du| interpolated to vertices (area-weighted panel average)."""
    dun = boundary_gradient_norm(sol)
    mesh = sol.mesh
    acc = np.zeros(mesh.n_vertices)
    np.add.at(acc, mesh.triangles.ravel(),
              np.repeat(dun * mesh.tri_areas / 3.0, 3))
    return acc / mesh.vertex_areas


def capacity(sol: PotentialSolution):
    """(cap_from_charge, cap_from_gradient).

    Charge route: total panel charge.  Gradient route: boundary-integral
    identity Cap = (1/(4 pi)) * int |Du| dS with |Du| from the density jump.
    """
    cap_charge = float(np.sum(sol.sigma * sol.mesh.tri_areas))
    cap_gradient = float(np.sum(boundary_gradient_norm(sol) * sol.mesh.tri_areas) / FOUR_PI)
    return cap_charge, cap_gradient


def dump_solution(sol: PotentialSolution, path):
    """JSON dump of densities, capacity, and diagnostics (mesh by provenance)."""
    shape = sol.mesh.shape
    if shape is None:
        raise SolverError("cannot dump a solution whose mesh has no shape provenance")
    payload = {
        "shape": _shape_to_dict(shape),
        "refinement": int(sol.mesh.refinement),
        "cap": sol.cap,
        "sigma": [float(s) for s in sol.sigma],
        "diagnostics": sol.diagnostics,
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)


def load_solution(path) -> PotentialSolution:
    with open(path) as f:
        payload = json.load(f)
    shape = shape_from_dict(payload["shape"])
    mesh = make_surface(shape, payload["refinement"])
    sigma = np.asarray(payload["sigma"], dtype=float)
    if sigma.shape[0] != mesh.n_triangles:
        raise SolverError("density length does not match the rebuilt mesh")
    return PotentialSolution(mesh=mesh, sigma=sigma, cap=float(payload["cap"]),
                             diagnostics=dict(payload.get("diagnostics", {})))


def _shape_to_dict(shape):
    d = {"kind": shape.kind}
    if shape.kind == "sphere":
        d.update(radius=shape.radius, center=list(shape.center))
    elif shape.kind == "ellipsoid":
        d.update(a=shape.a, b=shape.b, c=shape.c)
    elif shape.kind == "perturbed_sphere":
        d.update(radius=shape.radius, modes=[list(m) for m in shape.modes])
    elif shape.kind == "torus":
        d.update(major_radius=shape.major_radius, minor_radius=shape.minor_radius)
    return d
