"""Coefficient functions, the divergence-form vector field, and the monotone
level-set functionals built from it.

For parameters (beta, c, d) and dimension n the coefficient functions are

    F(u) = (c u + d) u^(1 - (n-1) beta / (n-2)),
    G(u) = -((n-1) beta / ((n-2) u)) F(u) + d u^(-(n-1) beta / (n-2)),

the vector field is Z = F(u) D|Du|^beta + G(u) |Du|^beta Du, and its
divergence has the closed form (harmonic u only)

    div Z = F |Du|^(beta-4) [ a_beta |2(n-1)|Du|^2 Du/((n-2)u) - D|Du|^2|^2
                              + beta |Du|^2 (|D2u|^2 - n/(n-1) |D|Du||^2) ],

with a_beta = (beta/4)(beta - (n-2)/(n-1)).  The bracket's second term is
the refined-Kato slack, nonnegative for any harmonic function, so div Z >= 0
pointwise whenever c + d >= 0, d >= 0 and beta >= (n-2)/(n-1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, TransportError
from .geometry import surface_integral
from .levelset import LevelSetMesh, boundary_level, transport_sweep, transport_to_level
from .potential import PotentialSolution, eval_field


@dataclass(frozen=True)
class ParamSet:
    """(beta, c, d, n) with the admissibility region c+d >= 0, d >= 0,
    beta >= (n-2)/(n-1) used by the inequality and monotonicity operations;
    beta >= 0 suffices for the pointwise divergence machinery."""

    beta: float
    c: float
    d: float
    n: int = 3

    def __post_init__(self):
        if self.n < 3 or self.n != int(self.n):
            raise AdmissibilityError(f"dimension must be an integer >= 3, got {self.n}")
        if self.beta < 0:
            raise AdmissibilityError(f"beta must be >= 0, got {self.beta}")

    @property
    def beta_threshold(self):
        return (self.n - 2) / (self.n - 1)

    @property
    def a_beta(self):
        return 0.25 * self.beta * (self.beta - self.beta_threshold)

    def is_admissible(self):
        return (self.c + self.d >= 0.0 and self.d >= 0.0
                and self.beta >= self.beta_threshold - 1e-14)

    def require_admissible(self):
        if not self.is_admissible():
            raise AdmissibilityError(
                f"(beta={self.beta}, c={self.c}, d={self.d}) outside the "
                f"admissible region: need c+d >= 0, d >= 0, "
                f"beta >= {self.beta_threshold:.6g}"
            )
        return self


def coeff_F(u_val, p: ParamSet):
    """F(u) = (c u + d) u^(1 - (n-1) beta/(n-2)); nonnegative on (0, 1] for
    admissible (c, d)."""
    u = np.asarray(u_val, dtype=float)
    if np.any(u <= 0.0):
        raise ValueError("F(u) requires u > 0")
    expo = 1.0 - (p.n - 1) * p.beta / (p.n - 2)
    return (p.c * u + p.d) * u**expo


def coeff_G(u_val, p: ParamSet):
    u = np.asarray(u_val, dtype=float)
    if np.any(u <= 0.0):
        raise ValueError("G(u) requires u > 0")
    expo = -(p.n - 1) * p.beta / (p.n - 2)
    return -(p.n - 1) * p.beta / ((p.n - 2) * u) * coeff_F(u, p) + p.d * u**expo


def z_divergence(u, Du, D2u, p: ParamSet):
    """(Z, div Z, kato_slack) from field arrays; pure and vectorized.

    kato_slack = |D2u|^2 - n/(n-1) |D|Du||^2 with |D|Du|| = |D2u Du|/|Du|.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    Du = np.atleast_2d(np.asarray(Du, dtype=float))
    D2u = np.asarray(D2u, dtype=float).reshape(len(u), 3, 3)
    gn2 = np.einsum("ni,ni->n", Du, Du)
    if np.any(gn2 <= 0.0):
        raise ValueError("div Z is undefined where Du = 0")
    gn = np.sqrt(gn2)
    n = p.n
    F = coeff_F(u, p)
    G = coeff_G(u, p)
    hess_grad = np.einsum("nij,nj->ni", D2u, Du)     # (1/2) D|Du|^2
    Z = (p.beta * F * gn ** (p.beta - 2.0))[:, None] * hess_grad \
        + (G * gn**p.beta)[:, None] * Du

    avec = (2.0 * (n - 1) / (n - 2) * gn2 / u)[:, None] * Du - 2.0 * hess_grad
    hess2 = np.einsum("nij,nij->n", D2u, D2u)
    dgrad2 = np.einsum("ni,ni->n", hess_grad, hess_grad) / gn2  # |D|Du||^2
    kato = hess2 - n / (n - 1) * dgrad2
    divZ = F * gn ** (p.beta - 4.0) * (
        p.a_beta * np.einsum("ni,ni->n", avec, avec) + p.beta * gn2 * kato)
    return Z, divZ, kato


def eval_Z_div(sol: PotentialSolution, x, p: ParamSet):
    """Z, div Z, and the refined-Kato slack at one exterior point."""
    s = eval_field(sol, x)
    Z, divZ, kato = z_divergence(np.array([s.u]), s.Du[None, :], s.D2u[None], p)
    return Z[0], float(divZ[0]), float(kato[0])


# ---------------------------------------------------------------------------
# Level-set functionals
# ---------------------------------------------------------------------------


def functional_H(ls: LevelSetMesh, p: ParamSet) -> float:
    """int over {u=1/tau} of (beta F(u) |Du|^beta H + G(u) |Du|^(beta+1))."""
    p.require_admissible()
    integrand = (p.beta * coeff_F(ls.u, p) * ls.grad_norm**p.beta * ls.H
                 + coeff_G(ls.u, p) * ls.grad_norm ** (p.beta + 1.0))
    return surface_integral(ls, integrand)


def functional_F_beta(ls: LevelSetMesh, beta: float, n: int = 3) -> float:
    """tau^((n-1) beta/(n-2)) int |Du|^(beta+1) over the level set."""
    tau = ls.tau
    return tau ** ((n - 1) * beta / (n - 2)) * surface_integral(
        ls, ls.grad_norm ** (beta + 1.0))


def functional_F_beta_prime(ls: LevelSetMesh, beta: float, n: int = 3) -> float:
    """Closed-form derivative of F_beta in tau (|D log u| = |Du|/u)."""
    tau = ls.tau
    integrand = ls.grad_norm**beta * (ls.H - (n - 1) / (n - 2) * ls.grad_norm / ls.u)
    return -beta * tau ** ((n - 1) * beta / (n - 2) - 2.0) * surface_integral(ls, integrand)


def geometric_tau_grid(start=1.0, stop=50.0, count=40):
    return np.geomspace(start, stop, count)


@dataclass
class FunctionalCurve:
    """Sampled tau -> (H_beta^{c,d}, F_beta, F'_beta) with monotonicity
    diagnostics.  violations lists (index, increase, tolerance) triples for
    tolerance-exceeding increases of H; fprime_violations and
    convexity_violations play the same role for F'_beta > 0 and for negative
    second divided differences of F_beta."""

    params: ParamSet
    taus: np.ndarray
    H_cd: np.ndarray
    F_beta: np.ndarray
    F_beta_prime: np.ndarray
    residuals: np.ndarray
    violations: list = field(default_factory=list)
    fprime_violations: list = field(default_factory=list)
    convexity_violations: list = field(default_factory=list)

    @property
    def clean(self):
        return not (self.violations or self.fprime_violations
                    or self.convexity_violations)


def curve_from_levels(levels, p: ParamSet, noise=None) -> FunctionalCurve:
    """Evaluate the three functionals on precomputed levels and flag
    monotonicity/convexity violations beyond the noise tolerance.

    noise: optional per-tau absolute error estimates (e.g. the change under
    one refinement step); an increase only counts as a violation when it
    exceeds max(1e-6 |value|, local noise).
    """
    p.require_admissible()
    taus = np.array([ls.tau for ls in levels])
    H_cd = np.array([functional_H(ls, p) for ls in levels])
    Fb = np.array([functional_F_beta(ls, p.beta, p.n) for ls in levels])
    Fpr = np.array([functional_F_beta_prime(ls, p.beta, p.n) for ls in levels])
    res = np.array([ls.residual_max for ls in levels])
    noise = np.zeros_like(taus) if noise is None else np.asarray(noise, dtype=float)

    curve = FunctionalCurve(params=p, taus=taus, H_cd=H_cd, F_beta=Fb,
                            F_beta_prime=Fpr, residuals=res)
    for i in range(len(taus) - 1):
        inc = H_cd[i + 1] - H_cd[i]
        tol = max(1e-6 * abs(H_cd[i]), noise[i] + noise[i + 1])
        if inc > tol:
            curve.violations.append((i, float(inc), float(tol)))
    for i, v in enumerate(Fpr):
        tol = max(1e-6 * abs(Fb[i]) / max(taus[i], 1.0), noise[i])
        if v > tol:
            curve.fprime_violations.append((i, float(v), float(tol)))
    for i in range(1, len(taus) - 1):
        hl = taus[i] - taus[i - 1]
        hr = taus[i + 1] - taus[i]
        dd = ((Fb[i + 1] - Fb[i]) / hr - (Fb[i] - Fb[i - 1]) / hl) / (hl + hr)
        eps = max(1e-6 * abs(Fb[i]), noise[i - 1] + noise[i] + noise[i + 1])
        if dd < -2.0 * eps / (hl * hr):
            curve.convexity_violations.append((i, float(dd), float(2.0 * eps / (hl * hr))))
    return curve


def monotonicity_scan(sol: PotentialSolution, p: ParamSet, tau_grid,
                      levels=None, noise=None, **transport_kwargs) -> FunctionalCurve:
    """Transport along the tau grid (unless levels are supplied) and build
    the functional curve with violation flags."""
    if levels is None:
        levels = transport_sweep(sol, tau_grid, **transport_kwargs)
    return curve_from_levels(levels, p, noise=noise)


# ---------------------------------------------------------------------------
# Integral identity (coarea vs boundary difference)
# ---------------------------------------------------------------------------


@dataclass
class IdentityReport:
    lhs: float                 # coarea integral of div Z over {u0 < u < u1}
    rhs: float                 # H-functional difference between the levels
    gap: float
    rel_gap: float             # gap over max(|lhs|, |rhs|)
    s_grid: np.ndarray
    g_values: np.ndarray       # inner integrals int div Z / |Du| dS per level
    n_extrapolated: int = 0    # levels inside the near-boundary trust zone
    h_top: float = 0.0         # H-functional at u1 (magnitude scale for balls,
    h_bottom: float = 0.0      # where both sides of the identity vanish)

    @property
    def scale(self):
        return max(abs(self.lhs), abs(self.rhs), abs(self.h_top),
                   abs(self.h_bottom), 1e-300)


def _coarea_integrand(ls: LevelSetMesh, p: ParamSet) -> float:
    if ls.grad is None or ls.hess is None:
        raise TransportError("coarea integrand needs full field data on the level")
    _, divZ, _ = z_divergence(ls.u, ls.grad, ls.hess, p)
    return surface_integral(ls, divZ / ls.grad_norm)


def _panel_distance_ratio(sol, points):
    """min over points of (distance to boundary) / (local panel diameter)."""
    dist, idx = sol._centroid_tree().query(np.atleast_2d(points))
    return float(np.min(dist / sol.mesh.tri_diameters[idx]))


def integral_identity_check(sol: PotentialSolution, p: ParamSet,
                            u0: float, u1: float = 1.0, s_count: int = 33,
                            trust_ratio: float = 0.8,
                            **transport_kwargs) -> IdentityReport:
    """Both sides of the divergence-theorem identity on {u0 < u < u1}.

    LHS integrates div Z by the coarea formula (composite Simpson over the
    level value s, triangle quadrature within each level); RHS is the
    difference of the H-functional at the two ends.

    The Hessian of the piecewise-constant-density field is unreliable
    within about a panel of the boundary, so the inner integrand on levels
    closer than trust_ratio panel diameters (and on the boundary itself) is
    extrapolated quadratically from the trusted trend; the number of
    extrapolated nodes is reported.
    """
    p.require_admissible()
    if not (0.0 < u0 < u1 <= 1.0):
        raise ValueError(f"need 0 < u0 < u1 <= 1, got u0={u0}, u1={u1}")
    if s_count < 7 or s_count % 2 == 0:
        raise ValueError("s_count must be an odd integer >= 7 (composite Simpson)")

    s_grid = np.linspace(u0, u1, s_count)
    at_boundary = abs(u1 - 1.0) < 1e-14
    s_interior = s_grid[:-1] if at_boundary else s_grid
    # tau increases as s decreases; transport once outward-in, then reverse.
    taus = 1.0 / s_interior[::-1]
    levels = transport_sweep(sol, taus, **transport_kwargs)[::-1]

    g = np.full(s_count, np.nan)
    trusted = np.zeros(s_count, dtype=bool)
    for i, ls in enumerate(levels):
        if _panel_distance_ratio(sol, ls.vertices) >= trust_ratio:
            g[i] = _coarea_integrand(ls, p)
            trusted[i] = True
    n_trusted = int(trusted.sum())
    if n_trusted < 4:
        raise TransportError(
            f"only {n_trusted} of {s_count} levels clear the near-boundary "
            f"trust zone; lower u1 or refine the solve"
        )
    if n_trusted < s_count:
        # quadratic continuation of the smooth integrand through the shell
        fit_idx = np.nonzero(trusted)[0][-4:]
        coef = np.polyfit(s_grid[fit_idx], g[fit_idx], 2)
        untrusted = ~trusted
        g[untrusted] = np.polyval(coef, s_grid[untrusted])

    h = (u1 - u0) / (s_count - 1)
    w = np.ones(s_count)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    lhs = float(h / 3.0 * np.sum(w * g))

    start_mesh = transport_kwargs.get("start_mesh")
    top = boundary_level(sol, start_mesh) if at_boundary else levels[-1]
    bottom = levels[0]
    h_top = functional_H(top, p)
    h_bottom = functional_H(bottom, p)
    rhs = h_top - h_bottom
    gap = abs(lhs - rhs)
    return IdentityReport(lhs=lhs, rhs=rhs, gap=gap,
                          rel_gap=gap / max(abs(lhs), abs(rhs), 1e-300),
                          s_grid=s_grid, g_values=g,
                          n_extrapolated=s_count - n_trusted,
                          h_top=h_top, h_bottom=h_bottom)


# ---------------------------------------------------------------------------
# Seeded exterior sample points for the pointwise suites
# ---------------------------------------------------------------------------


def sample_exterior_points(sol: PotentialSolution, count: int, seed: int = 0,
                           radius_range=(1.2, 20.0)):
    """Deterministic exterior sample points around the body.

    Radii are log-uniform in radius_range times the shape scale, measured
    from the mesh centroid; points failing the exclusion guard are
    resampled.
    """
    rng = np.random.default_rng(seed)
    mesh = sol.mesh
    center = mesh.centroid()
    scale = 0.5 * float(np.max(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)))
    out = np.empty((count, 3))
    have = 0
    while have < count:
        m = 2 * (count - have)
        v = rng.normal(size=(m, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = np.exp(rng.uniform(math.log(radius_range[0]), math.log(radius_range[1]), m))
        pts = center + scale * r[:, None] * v
        dist, idx = sol.exclusion_distance(pts)
        good = dist > 0.25 * mesh.tri_diameters[idx]
        if mesh.shape is not None:
            good &= mesh.shape.implicit(pts) > 0
        pts = pts[good]
        take = min(len(pts), count - have)
        out[have:have + take] = pts[:take]
        have += take
    return out
