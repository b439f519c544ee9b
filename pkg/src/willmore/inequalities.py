"""Both sides of every boundary inequality, with slack and rigidity score.

Boundary |Du| always comes from the density jump (4 pi phi per panel); mean
curvature comes from the mesh (analytic when parametric).  Willmore-type
integrands use |H| as written, so mildly non-convex shapes remain valid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError
from .functionals import ParamSet
from .geometry import SurfaceMesh, mesh_curvature, surface_integral
from .oracles import sphere_area
from .potential import PotentialSolution, boundary_gradient_norm

INEQUALITY_IDS = (
    "parametric_1_2",
    "willmore_1_5",
    "generalized_1_6",
    "weighted_minkowski_1_7",
    "quantitative_willmore_1_8",
    "geomA_1_9",
    "geomB_1_10",
)


@dataclass
class InequalityReport:
    """lhs <= rhs with slack oriented so that slack >= 0 means it holds.

    rel_slack is slack over a scale built from the magnitudes of the terms
    entering both sides (so it stays meaningful when both sides vanish, as
    for balls in the quantitative inequalities); rigidity_score = |rel_slack|
    is ~0 exactly for round balls.
    """

    inequality_id: str
    params: dict
    lhs: float
    rhs: float
    slack: float
    rel_slack: float
    verdict: str
    rigidity_score: float
    scale: float

    @classmethod
    def build(cls, inequality_id, params, lhs, rhs, scale, tolerance=0.0):
        slack = rhs - lhs
        scale = max(abs(lhs), abs(rhs), scale, 1e-300)
        rel = slack / scale
        verdict = "holds" if slack >= -max(tolerance, 1e-12 * scale) else "violated"
        return cls(inequality_id=inequality_id, params=params, lhs=lhs, rhs=rhs,
                   slack=slack, rel_slack=rel, verdict=verdict,
                   rigidity_score=abs(rel), scale=scale)


def _boundary_data(sol: PotentialSolution, mesh: SurfaceMesh):
    """Per-panel (|Du|, H, area): H as the triangle mean of vertex values,
    matching the triangle-mean quadrature used everywhere else."""
    dun = boundary_gradient_norm(sol)
    Hv = mesh_curvature(mesh)
    Ht = Hv[mesh.triangles].mean(axis=1)
    return dun, Ht, mesh.tri_areas


def check_parametric(sol, mesh, p: ParamSet, tolerance=0.0) -> InequalityReport:
    """d (n-2)^(b+1) |S| Cap^((n-2-b)/(n-2))
       <= b (c+d) int |Du|^b H + [d - (n-1) b (c+d)/(n-2)] int |Du|^(b+1)."""
    p.require_admissible()
    n, beta, c, d = p.n, p.beta, p.c, p.d
    dun, Ht, areas = _boundary_data(sol, mesh)
    S = sphere_area(n)
    I1 = float(np.sum(dun**beta * Ht * areas))
    I2 = float(np.sum(dun ** (beta + 1.0) * areas))
    lhs = d * (n - 2) ** (beta + 1.0) * S * sol.cap ** ((n - 2.0 - beta) / (n - 2.0))
    coef2 = d - (n - 1.0) * beta * (c + d) / (n - 2.0)
    rhs = beta * (c + d) * I1 + coef2 * I2
    scale = abs(lhs) + abs(beta * (c + d) * I1) + abs(coef2 * I2)
    return InequalityReport.build(
        "parametric_1_2", {"beta": beta, "c": c, "d": d, "n": n},
        lhs, rhs, scale, tolerance)


def check_willmore(mesh, n: int = 3, tolerance=0.0) -> InequalityReport:
    """|S^{n-1}| <= int (|H|/(n-1))^(n-1); needs no potential."""
    Hv = mesh_curvature(mesh)
    rhs = surface_integral(mesh, (np.abs(Hv) / (n - 1.0)) ** (n - 1.0))
    lhs = sphere_area(n)
    return InequalityReport.build("willmore_1_5", {"n": n}, lhs, rhs,
                                  abs(lhs) + abs(rhs), tolerance)


def check_generalized_willmore(sol, mesh, p_exp: float, n: int = 3,
                               tolerance=0.0) -> InequalityReport:
    """|S| Cap^((n-1-p)/(n-2)) <= int (|H|/(n-1))^p for p >= (2n-3)/(n-1)."""
    p_min = (2.0 * n - 3.0) / (n - 1.0)
    if p_exp < p_min - 1e-14:
        raise AdmissibilityError(f"exponent {p_exp} below the threshold {p_min}")
    Hv = mesh_curvature(mesh)
    rhs = surface_integral(mesh, (np.abs(Hv) / (n - 1.0)) ** p_exp)
    lhs = sphere_area(n) * sol.cap ** ((n - 1.0 - p_exp) / (n - 2.0))
    return InequalityReport.build("generalized_1_6", {"p": p_exp, "n": n},
                                  lhs, rhs, abs(lhs) + abs(rhs), tolerance)


def _weighted_lhs(dun, Ht, areas, n):
    ex = (n - 2.0) / (n - 1.0)
    return ex * float(np.sum(dun**ex * (Ht - (n - 1.0) / (n - 2.0) * dun) * areas))


def check_weighted_minkowski(sol, mesh, n: int = 3, tolerance=0.0) -> InequalityReport:
    """Weighted-measure form: the weight is (|Du| / avg |Du|)^((n-2)/(n-1))."""
    dun, Ht, areas = _boundary_data(sol, mesh)
    S = sphere_area(n)
    ex = (n - 2.0) / (n - 1.0)
    A = float(np.sum(areas))
    avg = float(np.sum(dun * areas)) / A
    weight = (dun / avg) ** ex
    lhs = _weighted_lhs(dun, Ht, areas, n)
    bracket = float(np.sum(Ht / (n - 1.0) * weight * areas)) - S ** (1.0 / (n - 1.0)) * A**ex
    factor = (n - 2.0) ** ((2.0 * n - 3.0) / (n - 1.0)) * S**ex * (sol.cap / A) ** ex
    rhs = factor * bracket
    scale = (abs(lhs) + abs(factor) * (abs(float(np.sum(Ht / (n - 1.0) * weight * areas)))
                                       + S ** (1.0 / (n - 1.0)) * A**ex))
    return InequalityReport.build("weighted_minkowski_1_7", {"n": n},
                                  lhs, rhs, scale, tolerance)


def check_quantitative_willmore(sol, mesh, n: int = 3, tolerance=0.0) -> InequalityReport:
    """Willmore-deficit form; the rhs bracket is nonnegative by the Willmore
    inequality, and both sides vanish exactly on balls."""
    dun, Ht, areas = _boundary_data(sol, mesh)
    S = sphere_area(n)
    ex = (n - 2.0) / (n - 1.0)
    Hv = mesh_curvature(mesh)
    W = surface_integral(mesh, (np.abs(Hv) / (n - 1.0)) ** (n - 1.0))
    lhs = _weighted_lhs(dun, Ht, areas, n)
    factor = (n - 2.0) ** ((2.0 * n - 3.0) / (n - 1.0)) * S**ex * sol.cap**ex
    rhs = factor * (W ** (1.0 / (n - 1.0)) - S ** (1.0 / (n - 1.0)))
    scale = abs(lhs) + abs(factor) * (W ** (1.0 / (n - 1.0)) + S ** (1.0 / (n - 1.0)))
    return InequalityReport.build("quantitative_willmore_1_8", {"n": n},
                                  lhs, rhs, scale, tolerance)


def check_geomAB(sol, mesh, beta: float, n: int = 3, tolerance=0.0):
    """The two endpoint inequalities of the parametric family:

    A: (n-2)^(b+1) |S| Cap^((n-2-b)/(n-2)) <= int |Du|^(b+1)
    B: (n-1)/(n-2) int |Du|^(b+1) <= int |Du|^b H
    """
    threshold = (n - 2.0) / (n - 1.0)
    if beta < threshold - 1e-14:
        raise AdmissibilityError(f"beta {beta} below the threshold {threshold}")
    dun, Ht, areas = _boundary_data(sol, mesh)
    S = sphere_area(n)
    I1 = float(np.sum(dun**beta * Ht * areas))
    I2 = float(np.sum(dun ** (beta + 1.0) * areas))
    lhsA = (n - 2.0) ** (beta + 1.0) * S * sol.cap ** ((n - 2.0 - beta) / (n - 2.0))
    reportA = InequalityReport.build("geomA_1_9", {"beta": beta, "n": n},
                                     lhsA, I2, abs(lhsA) + abs(I2), tolerance)
    lhsB = (n - 1.0) / (n - 2.0) * I2
    reportB = InequalityReport.build("geomB_1_10", {"beta": beta, "n": n},
                                     lhsB, I1, abs(lhsB) + abs(I1), tolerance)
    return reportA, reportB


def check_all(sol, mesh, p: ParamSet, p_exp: float = None, tolerance=0.0):
    """All seven checks; p_exp defaults to beta + 1 (the natural pairing)."""
    if p_exp is None:
        p_exp = p.beta + 1.0
    repA, repB = check_geomAB(sol, mesh, p.beta, p.n, tolerance)
    return {
        "parametric_1_2": check_parametric(sol, mesh, p, tolerance),
        "willmore_1_5": check_willmore(mesh, p.n, tolerance),
        "generalized_1_6": check_generalized_willmore(sol, mesh, p_exp, p.n, tolerance),
        "weighted_minkowski_1_7": check_weighted_minkowski(sol, mesh, p.n, tolerance),
        "quantitative_willmore_1_8": check_quantitative_willmore(sol, mesh, p.n, tolerance),
        "geomA_1_9": repA,
        "geomB_1_10": repB,
    }
