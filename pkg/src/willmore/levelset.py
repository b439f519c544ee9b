"""Equipotential surfaces {u = u0} realized by gradient-flow transport.

Vertices of the boundary mesh are advected along dx/ds = -Du/|Du|^2, under
which u decreases at unit rate, so the parameter is effectively log(tau).
Connectivity is inherited, giving a per-vertex correspondence across levels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import TransportError
from .geometry import SurfaceMesh, _triangle_geometry, mesh_curvature
from .potential import PotentialSolution, unpack_rows, vertex_gradient_norm

# Dormand-Prince RK45 tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class LevelSetMesh:
    """Mesh transported to {u = u0}, with the field data functionals need."""

    u0: float
    vertices: np.ndarray      # (V, 3)
    triangles: np.ndarray     # (T, 3), inherited connectivity
    u: np.ndarray             # (V,) evaluated values
    grad: np.ndarray | None   # (V, 3) Du, None on the boundary level
    grad_norm: np.ndarray     # (V,)
    hess: np.ndarray | None   # (V, 3, 3), None on the boundary level
    H: np.ndarray             # (V,) level-set mean curvature
    tri_areas: np.ndarray     # recomputed from transported triangles
    residual_max: float
    source_mesh: SurfaceMesh = field(repr=False, default=None)

    @property
    def tau(self):
        return 1.0 / self.u0

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def area(self):
        return float(np.sum(self.tri_areas))

    def field_normals(self):
        """nu = -Du/|Du| (points towards infinity); boundary level uses the
        mesh normals directly."""
        if self.grad is None:
            return self.source_mesh.vertex_normals.copy()
        return -self.grad / self.grad_norm[:, None]


def boundary_level(sol: PotentialSolution, mesh: SurfaceMesh = None) -> LevelSetMesh:
    """The tau = 1 level is the boundary itself: curvature from the mesh,
    |Du| from the density jump interpolated to vertices.

    Passing a coarser mesh of the same shape keeps the quadrature family
    consistent with a sweep transported on that mesh; its vertex gradients
    then come from the nearest solve panel.
    """
    if mesh is None or mesh is sol.mesh:
        mesh = sol.mesh
        grad_norm = vertex_gradient_norm(sol)
    else:
        _, idx = sol._centroid_tree().query(mesh.vertices)
        grad_norm = 4.0 * math.pi * sol.sigma[idx]
    return LevelSetMesh(
        u0=1.0,
        vertices=mesh.vertices.copy(),
        triangles=mesh.triangles,
        u=np.ones(mesh.n_vertices),
        grad=None,
        grad_norm=grad_norm,
        hess=None,
        H=mesh_curvature(mesh),
        tri_areas=mesh.tri_areas.copy(),
        residual_max=0.0,
        source_mesh=mesh,
    )


def _grad_guard(sol: PotentialSolution):
    mesh = sol.mesh
    ext = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    diam = float(np.linalg.norm(ext))
    return 1e-6 * (sol.n - 2) * sol.cap / diam**2


def _rhs(sol, X, gmin):
    """Flow velocity -u Du/|Du|^2 for the log(tau) parametrization."""
    rows = sol._eval_raw(X, want_hess=False)
    u = rows[:, 0]
    g = rows[:, 1:4]
    gn2 = np.einsum("ni,ni->n", g, g)
    if np.any(gn2 < gmin * gmin):
        k = int(np.argmin(gn2))
        raise TransportError(
            f"|Du| = {math.sqrt(gn2[k]):.3e} below the critical-point guard "
            f"{gmin:.3e} at vertex {k} (u = {u[k]:.6g})"
        )
    return u, -(u / gn2)[:, None] * g


def _rk45(sol, X, t_span, gmin, rtol, scale):
    """Lockstep adaptive Dormand-Prince step over all vertices at once."""
    t, t_end = t_span
    h = min(0.1, t_end - t)
    atol = rtol * scale
    k = [None] * 7
    _, k[0] = _rhs(sol, X, gmin)
    steps = 0
    while t < t_end - 1e-14 * max(1.0, t_end):
        steps += 1
        if steps > 10000:
            raise TransportError("adaptive stepper exceeded 10000 steps")
        h = min(h, t_end - t)
        for s in range(1, 7):
            Xs = X.copy()
            for j, a in enumerate(_DP_A[s]):
                if a != 0.0:
                    Xs += (h * a) * k[j]
            _, k[s] = _rhs(sol, Xs, gmin)
        X5 = X.copy()
        for j in range(7):
            if _DP_B5[j] != 0.0:
                X5 += (h * _DP_B5[j]) * k[j]
        err = np.zeros_like(X)
        for j in range(7):
            db = _DP_B5[j] - _DP_B4[j]
            if db != 0.0:
                err += (h * db) * k[j]
        enorm = float(np.max(np.linalg.norm(err, axis=1)
                             / (atol + rtol * np.linalg.norm(X, axis=1))))
        if enorm <= 1.0:
            t += h
            X = X5
            k[0] = k[6]  # FSAL: stage 7 sits at the accepted point
        h *= min(5.0, max(0.2, 0.9 * (enorm + 1e-16) ** -0.2))
    return X


def _newton_polish(sol, X, u0, gmin, residual_rtol, max_iter=12):
    for _ in range(max_iter):
        u, vel = _rhs(sol, X, gmin)  # vel = -u Du/|Du|^2
        res = np.max(np.abs(u - u0)) / u0
        if res <= residual_rtol:
            return X, u, float(res)
        # move along the flow by the u-mismatch: du/ds = -1 in flow parameter
        X = X + ((u - u0) / u)[:, None] * vel
    raise TransportError(
        f"root polish did not reach residual {residual_rtol:.1e} at u0={u0}: "
        f"stuck at {res:.3e}"
    )


def transport_to_level(sol: PotentialSolution, start, u0: float,
                       rtol=1e-9, residual_rtol=1e-8,
                       check_orientation=True) -> LevelSetMesh:
    """Carry a start mesh along the gradient flow down to {u = u0}.

    start may be a boundary SurfaceMesh (first step leaves the surface along
    the outward normal, using the density-jump gradient) or a LevelSetMesh
    with a larger u0.  The start mesh need not be the solve mesh: a coarser
    companion mesh of the same shape gives cheap level quadrature on an
    accurately solved field.
    """
    if not (0.0 < u0 < 1.0):
        raise TransportError(f"target level u0={u0} must lie in (0, 1)")
    gmin = _grad_guard(sol)
    scale = float(np.max(np.abs(sol.mesh.vertices)))

    if isinstance(start, SurfaceMesh):
        X, u_start = _leave_boundary(sol, start, u0)
        triangles = start.triangles
    else:
        if u0 >= start.u0:
            raise TransportError(
                f"target u0={u0} must be below the start level u0={start.u0}")
        X = start.vertices.copy()
        u_start = start.u.copy()
        triangles = start.triangles

    # log(tau) runs from -log(u) to -log(u0); integrate the lockstep span
    # from the largest current u down to the target.
    t_records = -np.log(u_start)
    t_end = -math.log(u0)
    span = t_end - float(np.min(t_records))
    if span > 1e-12:
        X = _rk45(sol, X, (0.0, span), gmin, rtol, scale)
    X, u, residual = _newton_polish(sol, X, u0, gmin, residual_rtol)
    return _finalize_level(sol, X, triangles, u0, u, residual, check_orientation)


def _leave_boundary(sol: PotentialSolution, start: SurfaceMesh, u0_target):
    """Initial offset along the outward normal, sized to stay clear of the
    start mesh's panel scale but never overshooting the target level."""
    if start is sol.mesh:
        gv = vertex_gradient_norm(sol)
    else:
        # coarse companion mesh: nearest fine panel supplies the jump value
        _, idx = sol._centroid_tree().query(start.vertices)
        gv = 4.0 * math.pi * sol.sigma[idx]
    vdiam = np.zeros(start.n_vertices)
    np.maximum.at(vdiam, start.triangles.ravel(),
                  np.repeat(start.tri_diameters, 3))
    delta = np.minimum(0.6 * vdiam, 0.5 * (1.0 - u0_target) / gv)
    X = start.vertices + delta[:, None] * start.vertex_normals
    rows = sol._eval_raw(X, want_hess=False)
    u = np.minimum(rows[:, 0], 1.0 - 1e-12)
    return X, u


def _finalize_level(sol, X, triangles, u0, u, residual, check_orientation):
    rows = sol._eval_raw(X, want_hess=True)
    u_eval, grad, hess = unpack_rows(rows)
    gn = np.linalg.norm(grad, axis=1)
    H = np.einsum("ni,nij,nj->n", grad, hess, grad) / gn**3
    areas, tri_normals, _, _ = _triangle_geometry(X, triangles)
    ls = LevelSetMesh(
        u0=float(u0), vertices=X, triangles=triangles,
        u=u_eval, grad=grad, grad_norm=gn, hess=hess, H=H,
        tri_areas=areas, residual_max=float(residual), source_mesh=sol.mesh,
    )
    if check_orientation:
        _check_normal_agreement(ls, tri_normals)
    return ls


def _check_normal_agreement(ls: LevelSetMesh, tri_normals, max_angle_deg=5.0):
    """nu = -Du/|Du| must agree with the transported triangle normals."""
    nu = ls.field_normals()
    vtx_normals = np.zeros_like(nu)
    w = np.repeat(ls.tri_areas[:, None] * tri_normals, 3, axis=0)
    np.add.at(vtx_normals, ls.triangles.ravel(), w)
    vtx_normals /= np.linalg.norm(vtx_normals, axis=1, keepdims=True)
    cosang = np.einsum("ni,ni->n", nu, vtx_normals)
    worst = float(np.degrees(np.arccos(np.clip(cosang.min(), -1.0, 1.0))))
    if worst > max_angle_deg:
        raise TransportError(
            f"field normal disagrees with mesh normal by {worst:.2f} deg "
            f"(limit {max_angle_deg}); transport is unreliable"
        )


def transport_sweep(sol: PotentialSolution, taus, start_mesh=None, **kwargs):
    """Level sets for an increasing tau grid, transported sequentially.

    tau = 1 returns the boundary level (always on the solve mesh, where the
    density data lives); each later level starts from the previous one, so
    the whole sweep costs one pass down the flow.  start_mesh may be a
    coarser mesh of the same shape used for the transported levels.
    """
    taus = np.asarray(taus, dtype=float)
    if np.any(np.diff(taus) <= 0.0) or taus[0] < 1.0:
        raise TransportError("tau grid must be strictly increasing with tau >= 1")
    if start_mesh is None:
        start_mesh = sol.mesh
    levels = []
    current = None
    for tau in taus:
        if abs(tau - 1.0) < 1e-14:
            ls = boundary_level(sol, start_mesh)
        else:
            start = current if current is not None and current.u0 < 1.0 else start_mesh
            ls = transport_to_level(sol, start, 1.0 / tau, **kwargs)
        levels.append(ls)
        current = ls
    return levels


def level_quantities(sol: PotentialSolution, ls: LevelSetMesh):
    """Per-vertex (u, |Du|, H, h) with h the second fundamental form of the
    level set (h = -D2u restricted to the tangent space, over |Du|).

    On the boundary level h comes from the shape's analytic fundamental
    form; trace(h) equals H up to round-off either way.
    """
    if ls.grad is None:
        mesh = ls.source_mesh
        if mesh.shape is None:
            raise TransportError("boundary level of an imported mesh has no analytic h")
        h = _implicit_second_fundamental_form(mesh.shape, ls.vertices)
        return ls.u.copy(), ls.grad_norm.copy(), ls.H.copy(), h
    nu = ls.field_normals()
    P = np.broadcast_to(np.eye(3), (ls.n_vertices, 3, 3)) - np.einsum("ni,nj->nij", nu, nu)
    h = -np.einsum("nab,nbc,ncd->nad", P, ls.hess, P) / ls.grad_norm[:, None, None]
    return ls.u.copy(), ls.grad_norm.copy(), ls.H.copy(), h


def _implicit_second_fundamental_form(shape, points):
    g = shape.implicit_grad(points)
    hF = shape.implicit_hess(points)
    gn = np.linalg.norm(g, axis=1)
    nu = g / gn[:, None]
    P = np.broadcast_to(np.eye(3), (points.shape[0], 3, 3)) - np.einsum("ni,nj->nij", nu, nu)
    return np.einsum("nab,nbc,ncd->nad", P, hF, P) / gn[:, None, None]


def umbilicity_spread(h, nu):
    """Per-vertex |kappa1 - kappa2| of the level set (0 iff umbilic there).

    h is the projected (V,3,3) form; the eigenvalue nearest zero along nu is
    discarded.
    """
    vals = np.linalg.eigvalsh(h)  # ascending, one eigenvalue ~ 0 along nu
    spread = np.empty(h.shape[0])
    for i, row in enumerate(vals):
        j = int(np.argmin(np.abs(row)))
        kept = np.delete(row, j)
        spread[i] = abs(kept[1] - kept[0])
    return spread
